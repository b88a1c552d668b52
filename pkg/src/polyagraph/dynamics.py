"""Mean vector field, its Lyapunov function, and an RK4 integrator on the simplex.

For a graph with edge exponents ``a_e`` the field is

    F_i(v) = -v_i + (1/N) sum_{e = {i,j}} v_i^a / (v_i^a + v_j^a)

and ``L(v) = -sum v + (1/N) sum_e log(v_i^a + v_j^a) / a`` satisfies
``F = v * grad L``. The hypergraph law replaces each edge ratio by
``v_i / sum_{j in e} v_j`` and ``L`` by ``-sum v + (1/N) sum_e log(sum_e v)``.

Points are plain float arrays. Nothing here insists on ``sum(v) == 1``
(finite differences step off the simplex); only nonnegativity and a
positive sum on every edge are required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fieldspec import FieldSpec
from .graph_model import Graph, Hypergraph


class DomainError(ValueError):
    """Point outside the region where the field is defined."""


class UndefinedDerivativeError(DomainError):
    """Second-order quantity requested where it blows up (exponent < 1 on the boundary)."""


# --- small helpers ----------------------------------------------------------

def as_simplex_point(x, tol: float = 1e-9) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DomainError("simplex point needs finite nonnegative entries")
    if abs(v.sum() - 1.0) > tol:
        raise DomainError(f"entries sum to {v.sum()!r}, not 1")
    return v


def uniform_point(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def tangent_basis(m: int) -> np.ndarray:
    """Orthonormal ``m x (m-1)`` basis of ``{w : sum w = 0}``."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(m), np.eye(m)[:, : m - 1]]))
    return q[:, 1:]


def _check_point(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DomainError("point has negative or non-finite entries")
    return v


def _edge_parts(v, g: Graph, spec: FieldSpec):
    e = g.edge_array
    a = spec.exponents(g)
    vi, vj = v[e[:, 0]], v[e[:, 1]]
    with np.errstate(divide="ignore"):
        pi, pj = np.power(vi, a), np.power(vj, a)
    return e, a, vi, vj, pi, pj, pi + pj


def _incidence(g: Hypergraph) -> np.ndarray:
    p = np.zeros((g.N, g.m))
    for k, e in enumerate(g.hyperedges):
        p[k, list(e)] = 1.0
    return p


def _dead_edges(s: np.ndarray) -> None:
    if np.any(s <= 0):
        raise DomainError("an edge has both endpoints at zero")


# --- field and Lyapunov function -------------------------------------------

def vector_field(x, g: Graph | Hypergraph, spec: FieldSpec) -> np.ndarray:
    """``F(x)``; tangent to the simplex wherever every edge sum is positive."""
    v = _check_point(x)
    if isinstance(g, Hypergraph):
        spec.check(g)
        p = _incidence(g)
        s = p @ v
        _dead_edges(s)
        return -v + v * (p.T @ (1.0 / s)) / g.N
    e, _, _, _, pi, pj, s = _edge_parts(v, g, spec)
    _dead_edges(s)
    gain = np.bincount(e[:, 0], pi / s, g.m) + np.bincount(e[:, 1], pj / s, g.m)
    return -v + gain / g.N


def lyapunov(x, g: Graph | Hypergraph, spec: FieldSpec) -> float:
    """Strict Lyapunov function; ``-inf`` if some edge has both endpoints at 0."""
    v = _check_point(x)
    if isinstance(g, Hypergraph):
        spec.check(g)
        s = _incidence(g) @ v
        with np.errstate(divide="ignore"):
            return float(-v.sum() + np.log(s).sum() / g.N)
    _, a, _, _, _, _, s = _edge_parts(v, g, spec)
    with np.errstate(divide="ignore"):
        return float(-v.sum() + np.sum(np.log(s) / a) / g.N)


def lyapunov_gradient(x, g: Graph | Hypergraph, spec: FieldSpec) -> np.ndarray:
    """Gradient of ``L``. Entries are ``+inf`` at zero coordinates whose
    incident edges carry an exponent below 1."""
    v = _check_point(x)
    if isinstance(g, Hypergraph):
        spec.check(g)
        p = _incidence(g)
        s = p @ v
        _dead_edges(s)
        return -1.0 + (p.T @ (1.0 / s)) / g.N
    e, a, vi, vj, _, _, s = _edge_parts(v, g, spec)
    _dead_edges(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        ti = np.power(vi, a - 1.0) / s
        tj = np.power(vj, a - 1.0) / s
    return -1.0 + (np.bincount(e[:, 0], ti, g.m) + np.bincount(e[:, 1], tj, g.m)) / g.N


def _hessian_raw(v, g: Graph | Hypergraph, spec: FieldSpec) -> np.ndarray:
    """Hessian formula without positivity checks; entries touching a zero
    coordinate may be nan/inf and must not be read by callers."""
    if isinstance(g, Hypergraph):
        p = _incidence(g)
        s = p @ v
        return -(p.T * (1.0 / s**2)) @ p / g.N
    e, a, vi, vj, pi, pj, s = _edge_parts(v, g, spec)
    unit = a == 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(unit, -1.0 / s**2, -a * np.power(vi, a - 1) * np.power(vj, a - 1) / s**2)
        di = np.where(unit, -1.0 / s**2, np.power(vi, a - 2) * ((a - 1) * pj - pi) / s**2)
        dj = np.where(unit, -1.0 / s**2, np.power(vj, a - 2) * ((a - 1) * pi - pj) / s**2)
    h = np.zeros((g.m, g.m))
    np.add.at(h, (e[:, 0], e[:, 1]), off)
    np.add.at(h, (e[:, 1], e[:, 0]), off)
    np.add.at(h, (e[:, 0], e[:, 0]), di)
    np.add.at(h, (e[:, 1], e[:, 1]), dj)
    return h / g.N


def lyapunov_hessian(x, g: Graph | Hypergraph, spec: FieldSpec) -> np.ndarray:
    v = _check_point(x)
    spec.check(g)
    if isinstance(g, Hypergraph):
        _dead_edges(_incidence(g) @ v)
    else:
        e, a, vi, vj, _, _, s = _edge_parts(v, g, spec)
        _dead_edges(s)
        zero_end = (vi == 0) | (vj == 0)
        if np.any(zero_end & (a != 1.0)):
            raise UndefinedDerivativeError("Hessian of L is undefined at a boundary point unless the exponent is 1")
    return _hessian_raw(v, g, spec)


def lyapunov_rate(x, g: Graph | Hypergraph, spec: FieldSpec) -> float:
    """``d/dt L(v(t)) = sum v_i (dL/dv_i)^2`` along the flow."""
    v = _check_point(x)
    grad = lyapunov_gradient(v, g, spec)
    live = v > 0
    return float(np.sum(v[live] * grad[live] ** 2))


# --- domain and integration -------------------------------------------------

def edge_sums(x, g: Graph | Hypergraph) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if isinstance(g, Hypergraph):
        return _incidence(g) @ v
    e = g.edge_array
    return v[e[:, 0]] + v[e[:, 1]]


@dataclass(frozen=True)
class DomainDelta:
    """Simplex points whose every edge sum is at least ``c`` (``0 < c < 1/N``)."""

    c: float

    @classmethod
    def default(cls, g: Graph | Hypergraph) -> "DomainDelta":
        return cls(1.0 / (2 * g.N))

    def validate(self, g: Graph | Hypergraph) -> None:
        if not 0 < self.c < 1.0 / g.N:
            raise DomainError(f"c={self.c} must lie in (0, 1/N) = (0, {1.0 / g.N})")

    def contains(self, x, g: Graph | Hypergraph, tol: float = 1e-9) -> bool:
        v = np.asarray(x, dtype=float)
        if np.any(v < 0) or abs(v.sum() - 1) > tol:
            return False
        return bool(np.all(edge_sums(v, g) >= self.c - tol))


@dataclass
class OdeTrajectory:
    t: np.ndarray
    x: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def integrate(x0, g: Graph | Hypergraph, spec: FieldSpec, t_end: float, dt: float = 1e-2,
              delta: DomainDelta | None = None) -> OdeTrajectory:
    """Classical fixed-step RK4, each accepted state renormalized onto the simplex.

    Raises DomainError if a state leaves ``delta`` (default ``c = 1/(2N)``).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = delta or DomainDelta.default(g)
    delta.validate(g)
    x = as_simplex_point(x0).copy()
    if not delta.contains(x, g):
        raise DomainError("initial point is outside the domain")
    n = int(round(t_end / dt))
    ts = np.arange(n + 1) * dt
    out = np.empty((n + 1, len(x)))
    out[0] = x

    def f(y):
        return vector_field(y, g, spec)

    for k in range(1, n + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if x.min() < -1e-12:
            raise DomainError(f"step {k} (t={ts[k]:.4g}) produced a negative coordinate")
        x = np.clip(x, 0.0, None)
        x /= x.sum()
        if not delta.contains(x, g):
            raise DomainError(f"step {k} (t={ts[k]:.4g}) left the domain; min edge sum {edge_sums(x, g).min():.3g}")
        out[k] = x
    return OdeTrajectory(ts, out)
