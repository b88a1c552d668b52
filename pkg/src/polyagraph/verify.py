"""Property suite behind ``polyagraph verify``.

Each check returns a :class:`Check`; a run passes when every check does.
Finite differences use central steps of ``1e-6``; relative errors are
taken norm-wise with a unit floor, ``max|a - b| / max(max|b|, 1)``, so an
exactly vanishing gradient (one-hyperedge case) is compared absolutely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dynamics as dyn
from . import urn
from .equilibria import bipartite_spectrum, find_equilibria, jacobian, omega_set
from .fieldspec import FieldSpec, HYPERGRAPH
from .graph_model import Graph, Hypergraph, analyze, generate

FD_STEP = 1e-6


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def rel_err(a, b, floor: float = 1.0) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


def central_diff(f: Callable, v: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Columns ``(f(v + h e_k) - f(v - h e_k)) / 2h``; scalar ``f`` gives a vector."""
    cols = []
    for k in range(len(v)):
        d = np.zeros_like(v)
        d[k] = h
        cols.append((np.asarray(f(v + d)) - np.asarray(f(v - d))) / (2 * h))
    return np.array(cols).T


def interior_points(m: int, n: int, rng: np.random.Generator, floor: float = 0.1) -> np.ndarray:
    """Dirichlet(1) points shrunk towards the centre so every entry is at least ``floor/m``."""
    return (1 - floor) * rng.dirichlet(np.ones(m), size=n) + floor / m


def domain_points(g, n: int, rng: np.random.Generator, delta: dyn.DomainDelta | None = None) -> np.ndarray:
    """Dirichlet(1) points rejected until ``n`` of them lie in ``delta`` (default ``c = 1/(2N)``)."""
    delta = delta or dyn.DomainDelta.default(g)
    out = []
    while len(out) < n:
        x = rng.dirichlet(np.ones(g.m))
        if delta.contains(x, g):
            out.append(x)
    return np.array(out).reshape(n, g.m)


def check_calculus(g, spec: FieldSpec, points: np.ndarray, tol: float = 1e-6) -> list[Check]:
    tag = _tag(g, spec)
    grad_err = jac_err = hess_err = tan_err = prod_err = 0.0
    for v in points:
        grad_err = max(grad_err, rel_err(dyn.lyapunov_gradient(v, g, spec),
                                         central_diff(lambda y: dyn.lyapunov(y, g, spec), v)))
        jac_err = max(jac_err, rel_err(jacobian(v, g, spec),
                                       central_diff(lambda y: dyn.vector_field(y, g, spec), v)))
        hess_err = max(hess_err, rel_err(dyn.lyapunov_hessian(v, g, spec),
                                         central_diff(lambda y: dyn.lyapunov_gradient(y, g, spec), v)))
        f = dyn.vector_field(v, g, spec)
        tan_err = max(tan_err, abs(float(f.sum())))
        prod_err = max(prod_err, float(np.max(np.abs(f - v * dyn.lyapunov_gradient(v, g, spec)))))
    return [
        Check(f"{tag} gradient vs finite differences", grad_err <= tol, f"rel err {grad_err:.3g}"),
        Check(f"{tag} jacobian vs finite differences", jac_err <= tol, f"rel err {jac_err:.3g}"),
        Check(f"{tag} hessian vs finite differences", hess_err <= tol, f"rel err {hess_err:.3g}"),
        Check(f"{tag} field tangent to simplex", tan_err <= 1e-12, f"max |sum F| {tan_err:.3g}"),
        Check(f"{tag} F = x * grad L", prod_err <= 1e-12, f"max err {prod_err:.3g}"),
    ]


def check_monotone(g, spec: FieldSpec, starts: np.ndarray, t_end: float = 30.0, dt: float = 1e-2) -> list[Check]:
    tag = _tag(g, spec)
    worst_dip = 0.0
    left = 0
    delta = dyn.DomainDelta.default(g)
    for x0 in starts:
        try:
            traj = dyn.integrate(x0, g, spec, t_end, dt, delta)
        except dyn.DomainError:
            left += 1
            continue
        ls = np.array([dyn.lyapunov(x, g, spec) for x in traj.x])
        worst_dip = min(worst_dip, float(np.diff(ls).min()))
    return [
        Check(f"{tag} L non-decreasing along RK4", worst_dip >= -1e-9, f"worst step {worst_dip:.3g}"),
        Check(f"{tag} trajectories stay in the domain", left == 0, f"{left} of {len(starts)} left"),
    ]


def sa_identity_error(g, spec: FieldSpec, n_steps: int, seed: int = 0, counts=None) -> float:
    """Max over steps of ``|x(n+1) - x(n) - gamma_n (F(x(n)) + u_n)|_inf`` along one run of ``step``."""
    rng = urn.RngSpec(seed).generator()
    state = urn.UrnState.initial(g.m if counts is None else counts)
    worst = 0.0
    for _ in range(n_steps):
        x = urn.proportions(state)
        f = dyn.vector_field(x, g, spec)
        state, dec = urn.step(state, g, spec, rng)
        worst = max(worst, float(np.max(np.abs(urn.proportions(state) - x - dec.gamma * (f + dec.noise)))))
    return worst


def replay_noise_mean(g, spec: FieldSpec, counts, n_replays: int, seed: int = 0) -> np.ndarray:
    """Mean of ``u_n`` over independent single steps from one fixed state."""
    state = urn.UrnState.initial(counts)
    total = np.zeros(g.m)
    for k in range(n_replays):
        _, dec = urn.step(state, g, spec, urn.RngSpec(seed, k).generator())
        total += dec.noise
    return total / n_replays


def check_sa(g, spec: FieldSpec, n_steps: int, n_replays: int, seed: int = 0) -> list[Check]:
    tag = _tag(g, spec)
    err = sa_identity_error(g, spec, n_steps, seed)
    counts = np.arange(1, g.m + 1) * 3
    mean = float(np.max(np.abs(replay_noise_mean(g, spec, counts, n_replays, seed))))
    bound = 4.0 / np.sqrt(n_replays)
    return [
        Check(f"{tag} stochastic-approximation identity", err <= 1e-12, f"max err {err:.3g} over {n_steps} steps"),
        Check(f"{tag} noise has zero mean", mean <= bound, f"|mean u| {mean:.3g} <= {bound:.3g}"),
    ]


def check_bipartite(g: Graph, n_points: int = 5) -> list[Check]:
    tag = _tag(g, FieldSpec.uniform(1.0))
    od = omega_set(g)
    out = []
    for v in od.sample(n_points):
        rep = bipartite_spectrum(g, v)
        bad = [k for k, ok in rep.flags().items() if not ok]
        out.append(Check(f"{tag} spectral flags at p={rep.p:.6g}", rep.all_ok,
                         "all true" if not bad else "false: " + ", ".join(bad)))
    return out


def check_continuum(g, spec: FieldSpec, seed: int = 0, n_points: int = 50) -> list[Check]:
    tag = _tag(g, spec)
    rng = np.random.default_rng(seed)
    pts = rng.dirichlet(np.ones(g.m), size=n_points)
    fmax = max(float(np.max(np.abs(dyn.vector_field(v, g, spec)))) for v in pts)
    eqs = find_equilibria(g, spec, seed=seed)
    full = tuple(range(g.m))
    found = any(c.support == full for c in eqs.continua)
    return [
        Check(f"{tag} F vanishes on the simplex", fmax <= 1e-12, f"max |F| {fmax:.3g}"),
        Check(f"{tag} continuum reported on the full face", found, f"{len(eqs.continua)} continua"),
    ]


def _tag(g, spec: FieldSpec) -> str:
    name = getattr(g, "name", "") or f"m={g.m}"
    return f"[{name} {spec.variant}" + (f" alpha={spec.alpha:g}]" if spec.variant == "uniform" else "]")


DEFAULT_GRAPHS = ("complete:3", "cycle:4", "star:5", "complete_bipartite:3:3")
DEFAULT_ALPHAS = (0.5, 1.0, 2.0)


def default_cases():
    return [(generate(*_split(s)), FieldSpec.uniform(a)) for s in DEFAULT_GRAPHS for a in DEFAULT_ALPHAS]


def _split(s: str):
    fam, *sizes = s.split(":")
    return (fam, *map(int, sizes))


def run_suite(cases, quick: bool = False, seed: int = 0) -> list[Check]:
    """Property checks for each ``(graph, field)`` pair.

    Full mode uses 100 points, 9 ODE starts and 10^4 urn steps per
    case; quick mode uses 10, 2 and 10^3.
    """
    n_pts, n_traj, n_steps, n_rep = (10, 2, 1000, 2500) if quick else (100, 9, 10_000, 10_000)
    t_end = 10.0 if quick else 30.0
    rng = np.random.default_rng(seed)
    out: list[Check] = []
    for g, spec in cases:
        pts = interior_points(g.m, n_pts, rng)
        starts = domain_points(g, n_traj, rng)
        if isinstance(g, Hypergraph) or spec.variant == HYPERGRAPH:
            out += check_continuum(g, spec, seed)
            out += check_calculus(g, spec, pts)
        else:
            out += check_calculus(g, spec, pts)
            out += check_monotone(g, spec, starts, t_end=t_end)
            rep = analyze(g)
            if rep.is_regular and rep.is_bipartite and np.all(spec.exponents(g) == 1.0):
                out += check_bipartite(g)
        out += check_sa(g, spec, n_steps, n_rep, seed)
    return out
