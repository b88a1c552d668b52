"""Equilibria of the mean field: face-wise solving, Jacobians, stability.

Zeros of ``F`` are organised by support ``S``: a point with ``v_i > 0``
exactly on ``S`` is an equilibrium iff ``dL/dv_i = 0`` for every
``i`` in ``S``. Each feasible face is solved by damped Newton on the
bordered system ``grad_S L = lambda * 1``, ``sum v_S = 1``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DomainError,
    UndefinedDerivativeError,
    _hessian_raw,
    lyapunov,
    lyapunov_gradient,
    tangent_basis,
    vector_field,
)
from .fieldspec import FieldSpec
from .graph_model import Graph, Hypergraph, analyze

ZERO_TOL = 1e-10       # real parts within this of 0 count as zero for classification
NULL_TOL = 1e-8        # eigenvalue magnitude treated as a flat direction when probing continua
DEDUPE_TOL = 1e-8
GRAD_TOL = 1e-11
MAX_HALVINGS = 60
MAX_FACE_BITS = 20


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate_zero_eigenvalue"
    INCONCLUSIVE = "inconclusive"


# --- Jacobian ---------------------------------------------------------------

def jacobian(v, g: Graph | Hypergraph, spec: FieldSpec) -> np.ndarray:
    """``dF_i/dv_j``.

    Defined everywhere for exponents >= 1; for an exponent below 1 it is
    undefined as soon as an endpoint of that edge sits at zero, in which
    case ``UndefinedDerivativeError`` is raised (classify such points with
    the off-support gradient rule instead).
    """
    x = np.asarray(v, dtype=float)
    if np.any(x < 0):
        raise DomainError("negative coordinate")
    m = g.m
    if isinstance(g, Hypergraph):
        spec.check(g)
        grad = lyapunov_gradient(x, g, spec)
        return np.diag(grad) + x[:, None] * _hessian_raw(x, g, spec)
    e = g.edge_array
    a = spec.exponents(g)
    vi, vj = x[e[:, 0]], x[e[:, 1]]
    if np.any((vi + vj) <= 0):
        raise DomainError("an edge has both endpoints at zero")
    if np.any((a < 1) & ((vi == 0) | (vj == 0))):
        raise UndefinedDerivativeError(
            "Jacobian undefined at a boundary point with exponent < 1; "
            "use the off-support gradient rule (classify)")
    pi, pj = vi**a, vj**a
    s2 = (pi + pj) ** 2
    dii = a * vi ** (a - 1) * pj / s2   # d(ratio_i)/dv_i
    dij = -a * pi * vj ** (a - 1) / s2  # d(ratio_i)/dv_j
    djj = a * vj ** (a - 1) * pi / s2
    dji = -a * pj * vi ** (a - 1) / s2
    jac = -np.eye(m)
    scale = 1.0 / g.N
    np.add.at(jac, (e[:, 0], e[:, 0]), dii * scale)
    np.add.at(jac, (e[:, 0], e[:, 1]), dij * scale)
    np.add.at(jac, (e[:, 1], e[:, 1]), djj * scale)
    np.add.at(jac, (e[:, 1], e[:, 0]), dji * scale)
    return jac


def tangent_spectrum(jac: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``jac`` on ``{sum w = 0}``.

    ``1^T JF = -1^T`` everywhere, so the simplex tangent space is invariant
    and this drops exactly one copy of ``-1`` from the full spectrum.
    """
    q = tangent_basis(jac.shape[0])
    return np.linalg.eigvals(q.T @ jac @ q)


def _sorted_eigs(ev: np.ndarray) -> np.ndarray:
    return ev[np.lexsort((ev.imag, ev.real))]


# --- classification -----------------------------------------------------------

@dataclass
class Equilibrium:
    point: np.ndarray
    support: tuple[int, ...]
    classification: Stability
    spectrum: np.ndarray | None           # full JF spectrum; None when JF is undefined
    tangent_eigs: np.ndarray | None
    off_support_gradient: dict[int, float]
    isolated: bool = True
    reason: str = ""

    @property
    def is_unstable(self) -> bool:
        return self.classification is Stability.UNSTABLE

    @property
    def max_real_part_nonzero(self) -> float:
        if self.tangent_eigs is None:
            return float("nan")
        nz = self.tangent_eigs[np.abs(self.tangent_eigs) > ZERO_TOL]
        return float(nz.real.max()) if len(nz) else float("nan")

    def label(self) -> str:
        return "(" + ",".join(f"{c:.6g}" for c in self.point) + ")"


def support_of(v, tol: float = 0.0) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(np.asarray(v) > tol))


def _analyse_point(v, g, spec, continuum: bool = False):
    x = np.asarray(v, dtype=float)
    sup = support_of(x)
    grad = lyapunov_gradient(x, g, spec)
    off = {i: float(grad[i]) for i in range(g.m) if i not in sup}
    try:
        jac = jacobian(x, g, spec)
    except UndefinedDerivativeError:
        jac = None
    full = tang = None
    if jac is not None:
        full = _sorted_eigs(np.linalg.eigvals(jac))
        tang = _sorted_eigs(tangent_spectrum(jac))

    growing = [i for i, d in off.items() if d > ZERO_TOL]
    if growing:
        infinite = any(np.isinf(off[i]) for i in growing)
        why = "boundary_infinite_gradient" if infinite else "positive_off_support_gradient"
        return Stability.UNSTABLE, full, tang, off, f"{why} at vertex {growing[0] + 1}"
    if tang is None:
        return Stability.INCONCLUSIVE, full, tang, off, "jacobian undefined"
    re = tang.real
    if np.any(re > ZERO_TOL):
        return Stability.UNSTABLE, full, tang, off, "eigenvalue with positive real part"
    n_zero = int(np.sum(np.abs(re) <= ZERO_TOL))
    if n_zero == 0:
        return Stability.STABLE, full, tang, off, ""
    if not continuum:
        return Stability.INCONCLUSIVE, full, tang, off, f"{n_zero} zero eigenvalue(s), no continuum detected"
    if n_zero == 1:
        return Stability.STABLE, full, tang, off, "transversally stable along a continuum"
    return Stability.DEGENERATE, full, tang, off, f"{n_zero} zero eigenvalues on a continuum"


def classify(v, g: Graph | Hypergraph, spec: FieldSpec, continuum: bool = False) -> Stability:
    """Stability of the equilibrium ``v``.

    Unstable if some off-support ``dL/dv_i`` is positive (``+inf`` included);
    otherwise decided by the Jacobian spectrum on the simplex tangent space.
    A zero eigenvalue is inconclusive unless ``continuum`` says one zero
    is forced by a line of equilibria.
    """
    return _analyse_point(v, g, spec, continuum)[0]


def make_equilibrium(v, g, spec, continuum: bool = False) -> Equilibrium:
    x = np.asarray(v, dtype=float)
    cls, full, tang, off, why = _analyse_point(x, g, spec, continuum)
    return Equilibrium(x, support_of(x), cls, full, tang, off, isolated=not continuum, reason=why)


# --- face solver ------------------------------------------------------------

def feasible_supports(g: Graph | Hypergraph, full_support_only: bool = False):
    """Supports whose face can hold a point of the domain: every edge must
    keep at least one endpoint in the support."""
    m = g.m
    if full_support_only:
        yield tuple(range(m))
        return
    if m > MAX_FACE_BITS:
        raise ValueError(f"face enumeration limited to m <= {MAX_FACE_BITS}; use full_support_only")
    groups = g.hyperedges if isinstance(g, Hypergraph) else g.edges
    for k in range(m, 0, -1):
        for sup in itertools.combinations(range(m), k):
            s = set(sup)
            if all(any(v in s for v in grp) for grp in groups):
                yield sup


@dataclass
class _FaceSystem:
    g: Graph | Hypergraph
    spec: FieldSpec
    support: tuple[int, ...]
    concave: bool

    def embed(self, y):
        v = np.zeros(self.g.m)
        v[list(self.support)] = y
        return v

    def residual(self, y, lam):
        grad = lyapunov_gradient(self.embed(y), self.g, self.spec)[list(self.support)]
        return np.concatenate([grad - lam, [y.sum() - 1.0]])

    def kkt(self, y):
        idx = list(self.support)
        h = _hessian_raw(self.embed(y), self.g, self.spec)[np.ix_(idx, idx)]
        k = len(idx)
        mat = np.zeros((k + 1, k + 1))
        mat[:k, :k] = h
        mat[:k, k] = -1.0
        mat[k, :k] = 1.0
        return mat

    def solve(self, y0, max_iter: int = 100):
        """Damped Newton from ``y0``; returns ``(y, None)`` or ``(None, reason)``."""
        y = np.asarray(y0, dtype=float)
        lam = 0.0
        with np.errstate(all="ignore"):
            r = self.residual(y, lam)
        if not np.all(np.isfinite(r)):
            return None, "non-finite gradient"
        for _ in range(max_iter):
            if np.max(np.abs(r[:-1])) <= GRAD_TOL and abs(r[-1]) <= 1e-14:
                return y, None
            with np.errstate(all="ignore"):
                d = np.linalg.lstsq(self.kkt(y), -r, rcond=None)[0]
            dy, dlam = d[:-1], d[-1]
            if not np.all(np.isfinite(d)):
                return None, "singular Newton system"
            # never step past the face boundary
            t = 1.0
            neg = dy < 0
            if np.any(neg):
                t = min(1.0, 0.99 * float(np.min(-y[neg] / dy[neg])))
            norm0 = np.linalg.norm(r)
            l0 = lyapunov(self.embed(y), self.g, self.spec) if self.concave else None
            for _ in range(MAX_HALVINGS):
                y_new = y + t * dy
                with np.errstate(all="ignore"):
                    r_new = self.residual(y_new, lam + t * dlam)
                if np.all(np.isfinite(r_new)):
                    better = np.linalg.norm(r_new) < norm0
                    if not better and self.concave:
                        better = lyapunov(self.embed(y_new), self.g, self.spec) > l0
                    if better:
                        break
                t *= 0.5
            else:
                return None, "line search failed"
            y, lam, r = y_new, lam + t * dlam, r_new
            if y.min() < 1e-9 * max(1.0, y.max()):
                return None, "drifted to the face boundary"
        if np.max(np.abs(r[:-1])) <= GRAD_TOL:
            return y, None
        return None, "iteration limit"


@dataclass
class Continuum:
    support: tuple[int, ...]
    samples: np.ndarray
    null_dim: int
    direction: np.ndarray


@dataclass
class FaceStatus:
    support: tuple[int, ...]
    found: int
    failed_starts: int
    reasons: dict[str, int] = field(default_factory=dict)


@dataclass
class EquilibriumSet:
    """Equilibria found; iterates over the point list. Continuum faces
    contribute one representative flagged ``isolated=False``."""

    points: list[Equilibrium]
    continua: list[Continuum]
    faces: list[FaceStatus]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    @property
    def unstable(self) -> list[Equilibrium]:
        return [e for e in self.points if e.is_unstable]

    @property
    def interior(self) -> list[Equilibrium]:
        return [e for e in self.points if len(e.support) == len(e.point)]


def _face_null_vectors(v, g, spec, support):
    idx = list(support)
    jac = jacobian(v, g, spec)[np.ix_(idx, idx)]
    k = len(idx)
    if k < 2:
        return np.zeros((k, 0))
    q = tangent_basis(k)
    w, vecs = np.linalg.eig(q.T @ jac @ q)
    keep = np.abs(w) <= NULL_TOL
    return np.real(q @ vecs[:, keep])


def _probe_continuum(system: _FaceSystem, y, g, spec):
    """Step along a flat direction and re-solve; a distinct nearby zero whose
    own flat direction is aligned with the displacement signals a continuum."""
    try:
        null = _face_null_vectors(system.embed(y), g, spec, system.support)
    except UndefinedDerivativeError:
        return None
    if null.shape[1] == 0:
        return None
    w = null[:, 0] / np.linalg.norm(null[:, 0])
    for sign in (1.0, -1.0):
        eps = 5e-4
        shrink = sign * w < 0
        if np.any(shrink):
            eps = min(eps, 0.5 * float(np.min(y[shrink] / np.abs(w[shrink]))))
        y1, _ = system.solve(y + sign * eps * w)
        if y1 is None:
            continue
        d = y1 - y
        dist = np.linalg.norm(d)
        if not (DEDUPE_TOL < dist <= 1e-3):
            continue
        null1 = _face_null_vectors(system.embed(y1), g, spec, system.support)
        if null1.shape[1] == 0:
            continue
        # alignment of the displacement with the flat subspace at y1
        proj = null1 @ np.linalg.lstsq(null1, d, rcond=None)[0]
        if np.linalg.norm(proj) >= 0.99 * dist:
            return Continuum(system.support, np.array([system.embed(y), system.embed(y1)]),
                             null.shape[1], _embed_dir(system, w))
    return None


def _embed_dir(system, w):
    out = np.zeros(system.g.m)
    out[list(system.support)] = w
    return out


def find_equilibria(g: Graph | Hypergraph, spec: FieldSpec, n_starts: int = 32, seed: int = 0,
                    full_support_only: bool = False) -> EquilibriumSet:
    """Enumerate equilibria face by face.

    Each feasible support is solved from the face barycentre plus
    ``n_starts`` Dirichlet(1) starts drawn from a stream keyed by
    ``(seed, face index)``. Zeros closer than 1e-8 are merged. Faces whose
    flat directions carry a line of zeros are reported as continua.
    Results are sorted by support, then lexicographically by point.
    """
    spec.check(g)
    concave = spec.max_exponent(g) <= 1.0
    points: list[Equilibrium] = []
    continua: list[Continuum] = []
    faces: list[FaceStatus] = []
    for face_no, sup in enumerate(feasible_supports(g, full_support_only)):
        system = _FaceSystem(g, spec, sup, concave)
        k = len(sup)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(face_no,))))
        starts = [np.full(k, 1.0 / k)] + list(rng.dirichlet(np.ones(k), size=n_starts))
        found: list[np.ndarray] = []
        status = FaceStatus(sup, 0, 0)
        for y0 in starts:
            y0 = np.maximum(y0, 1e-6)
            y0 /= y0.sum()
            y, why = system.solve(y0)
            if y is None:
                status.failed_starts += 1
                status.reasons[why] = status.reasons.get(why, 0) + 1
                continue
            if not any(np.max(np.abs(y - z)) <= DEDUPE_TOL for z in found):
                found.append(y)
        status.found = len(found)
        faces.append(status)
        if not found:
            continue
        cont = None
        for y in found:
            cont = _probe_continuum(system, y, g, spec)
            if cont is not None:
                break
        if cont is not None:
            bary = np.full(k, 1.0 / k)
            rep = min(found, key=lambda z: (np.linalg.norm(z - bary), tuple(z)))
            cont.samples = np.array([system.embed(z) for z in found] + list(cont.samples))
            continua.append(cont)
            points.append(make_equilibrium(system.embed(rep), g, spec, continuum=True))
        else:
            for y in found:
                v = system.embed(y)
                if np.max(np.abs(vector_field(v, g, spec))) > 1e-10:
                    status.reasons["residual too large"] = status.reasons.get("residual too large", 0) + 1
                    continue
                points.append(make_equilibrium(v, g, spec))
    points.sort(key=lambda e: (e.support, tuple(e.point)))
    return EquilibriumSet(points, continua, faces)


# --- closed forms and the bipartite structure ---------------------------------

def star_closed_form(m: int, alpha: float) -> np.ndarray:
    """Interior equilibrium of ``star(m)`` (centre last) for ``0 < alpha < 1``."""
    if m < 3:
        raise ValueError("star closed form needs m >= 3")
    if not 0 < alpha < 1:
        raise ValueError("star closed form needs 0 < alpha < 1")
    hub = (m - 1) ** (1.0 / (1.0 - alpha))
    denom = m - 1 + hub
    return np.array([1.0 / denom] * (m - 1) + [hub / denom])


def am_hm_gap(v, g: Graph) -> float:
    """``sum_i sum_{j~i} 1/(v_i+v_j) - N*m``; nonnegative on regular graphs,
    zero iff every edge sum is equal."""
    x = np.asarray(v, dtype=float)
    e = g.edge_array
    with np.errstate(divide="ignore"):
        return float(2.0 * np.sum(1.0 / (x[e[:, 0]] + x[e[:, 1]])) - g.N * g.m)


class NotRegularBipartiteError(ValueError):
    pass


@dataclass(frozen=True)
class OmegaDescriptor:
    """Segment of two-valued equilibria: ``p`` on ``part_a``, ``2/m - p`` on ``part_b``."""

    m: int
    part_a: tuple[int, ...]
    part_b: tuple[int, ...]

    @property
    def total(self) -> float:
        return 2.0 / self.m

    def point(self, p: float) -> np.ndarray:
        if not -1e-15 <= p <= self.total + 1e-15:
            raise ValueError(f"p={p} outside [0, {self.total}]")
        v = np.empty(self.m)
        v[list(self.part_a)] = p
        v[list(self.part_b)] = self.total - p
        return v

    def sample(self, n: int, interior: bool = True) -> np.ndarray:
        ps = np.linspace(0, self.total, n + 2)[1:-1] if interior else np.linspace(0, self.total, n)
        return np.array([self.point(p) for p in ps])

    def nearest_parameter(self, x) -> float:
        """Minimiser over ``[0, 2/m]`` of the Euclidean distance to ``point(p)``."""
        x = np.asarray(x, dtype=float)
        a, b = list(self.part_a), list(self.part_b)
        p = (x[a].sum() - x[b].sum() + len(b) * self.total) / self.m
        return float(min(max(p, 0.0), self.total))

    def parameter_of(self, v, tol: float = 1e-12) -> float | None:
        """``p`` if ``v`` lies on the segment (to ``tol``), else None."""
        p = self.nearest_parameter(v)
        return p if np.max(np.abs(self.point(p) - np.asarray(v))) <= tol else None


def omega_set(g: Graph) -> OmegaDescriptor:
    rep = analyze(g)
    if not (rep.is_regular and rep.is_bipartite):
        raise NotRegularBipartiteError("Omega is only defined for regular bipartite graphs")
    bp = rep.bipartition
    return OmegaDescriptor(g.m, tuple(sorted(bp.part_a)), tuple(sorted(bp.part_b)))


@dataclass
class BipartiteSpectrumReport:
    p: float
    q: float
    mu: float
    nu: float
    r: int
    order: tuple[int, ...]          # vertex order used for the block form: part A then part B
    s_matrix: np.ndarray
    jf_eigenvalues: np.ndarray
    s_eigenvalues: np.ndarray
    block_form_error: float         # max |JF - (-I + S/r)| in the block ordering
    zero_is_simple: bool
    nonzero_have_negative_real_part: bool
    complex_real_parts_equal_r_over_2: bool
    r_is_largest_real: bool
    r_is_simple: bool

    @property
    def all_ok(self) -> bool:
        return (self.zero_is_simple and self.nonzero_have_negative_real_part
                and self.complex_real_parts_equal_r_over_2 and self.r_is_largest_real
                and self.r_is_simple and self.block_form_error < 1e-12)

    def flags(self) -> dict[str, bool]:
        return {
            "zero_is_simple": self.zero_is_simple,
            "nonzero_have_negative_real_part": self.nonzero_have_negative_real_part,
            "complex_real_parts_equal_r_over_2": self.complex_real_parts_equal_r_over_2,
            "r_is_largest_real": self.r_is_largest_real,
            "r_is_simple": self.r_is_simple,
        }


def bipartite_spectrum(g: Graph, v=None, *, p: float | None = None) -> BipartiteSpectrumReport:
    """Spectral checks at an interior point of Omega (exponent 1).

    Builds ``S = [[r nu I, -mu M], [-nu M^T, r mu I]]`` with ``M`` the
    part-A-to-part-B adjacency, confirms ``JF = -I + S/r``, and tests:
    zero is a simple eigenvalue of JF, the other eigenvalues have negative
    real part, non-real eigenvalues of S have real part ``r/2``, and ``r``
    is the largest real eigenvalue of S and simple.
    """
    omega = omega_set(g)
    if (v is None) == (p is None):
        raise ValueError("give exactly one of v or p")
    if v is not None:
        p_val = omega.parameter_of(v)
        if p_val is None:
            raise ValueError("v is not on Omega")
    else:
        p_val = float(p)
    q_val = omega.total - p_val
    if not (p_val > 0 and q_val > 0):
        raise ValueError("v must lie in the interior of Omega (p, q > 0)")
    vv = omega.point(p_val)
    r = int(analyze(g).degree)
    a, b = list(omega.part_a), list(omega.part_b)
    order = tuple(a + b)
    adj = g.adjacency()
    mblock = adj[np.ix_(a, b)].astype(float)
    mu, nu = p_val / (p_val + q_val), q_val / (p_val + q_val)
    h = len(a)
    s = np.zeros((g.m, g.m))
    s[:h, :h] = r * nu * np.eye(h)
    s[:h, h:] = -mu * mblock
    s[h:, :h] = -nu * mblock.T
    s[h:, h:] = r * mu * np.eye(len(b))

    jac = jacobian(vv, g, FieldSpec.uniform(1.0))[np.ix_(order, order)]
    block_err = float(np.max(np.abs(jac - (-np.eye(g.m) + s / r))))
    jf_eigs = _sorted_eigs(np.linalg.eigvals(jac))
    s_eigs = _sorted_eigs(np.linalg.eigvals(s))

    abs_re = np.sort(np.abs(jf_eigs.real))
    zero_simple = abs_re[0] <= 1e-10 and abs_re[1] >= 1e-6
    zero_at = int(np.argmin(np.abs(jf_eigs)))
    rest = np.delete(jf_eigs, zero_at)
    negative = bool(np.all(rest.real < -ZERO_TOL))
    nonreal = s_eigs[np.abs(s_eigs.imag) > 1e-9]
    half_rule = bool(np.all(np.abs(nonreal.real - r / 2.0) <= 1e-8))
    real = s_eigs[np.abs(s_eigs.imag) <= 1e-9].real
    largest = bool(abs(real.max() - r) <= 1e-8)
    simple = int(np.sum(np.abs(real - r) <= 1e-6)) == 1
    return BipartiteSpectrumReport(p_val, q_val, mu, nu, r, order, s, jf_eigs, s_eigs, block_err,
                                   bool(zero_simple), negative, half_rule, largest, simple)
