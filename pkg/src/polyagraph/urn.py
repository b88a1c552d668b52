"""Exact simulation of the graph-based urn and its stochastic-approximation bookkeeping.

Every step adds one ball per edge (or hyperedge). One uniform variate is
consumed per edge per step, in edge order, so ``step`` applied ``n`` times
and ``simulate`` over ``n`` steps read the same random stream.

With ``x(n) = B(n) / (N0 + nN)`` the recursion is

    x(n+1) - x(n) = gamma_n * (F(x(n)) + u_n),
    gamma_n = 1 / (N0/N + n + 1),   u_n = xi(n) - E[xi(n) | F_n],   xi(n) = C(n+1) / N.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np

from .fieldspec import FieldSpec, HYPERGRAPH
from .graph_model import Graph, Hypergraph

# keeps N0 + n*N exactly representable as a float64 for the proportion map
MAX_TOTAL = 2**53


class UrnOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class RngSpec:
    """Per-trial random stream.

    The stream for ``(master_seed, trial_index)`` is PCG64 seeded by
    ``numpy.random.SeedSequence(master_seed, spawn_key=(trial_index,))``,
    i.e. the ``trial_index``-th child of ``SeedSequence(master_seed)``.
    SeedSequence hashing makes distinct trial indices independent streams.
    """

    master_seed: int
    trial_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.trial_index),))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class UrnState:
    counts: np.ndarray
    step: int
    initial_total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or np.any(c < 1):
            raise ValueError("ball counts must be integers >= 1")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def initial(cls, counts: Sequence[int] | int) -> "UrnState":
        if isinstance(counts, (int, np.integer)):
            counts = np.ones(int(counts), dtype=np.int64)
        c = np.asarray(counts, dtype=np.int64)
        return cls(c, 0, int(c.sum()))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class StepDecomposition:
    gamma: float
    xi: np.ndarray
    noise: np.ndarray
    expected_xi: np.ndarray
    indicators: np.ndarray  # 1 where the first endpoint (or the winner slot) got the ball
    winners: np.ndarray


def proportions(state: UrnState) -> np.ndarray:
    return state.counts / float(state.total)


def gamma(n: int, initial_total: int, n_edges: int) -> float:
    return 1.0 / (initial_total / n_edges + n + 1)


def _check_counts(g: Graph | Hypergraph, counts: np.ndarray) -> None:
    if len(counts) != g.m:
        raise ValueError(f"expected {g.m} bins, got {len(counts)}")


def _edge_probabilities(counts: np.ndarray, g: Graph, alphas: np.ndarray) -> np.ndarray:
    """Probability that the first endpoint of each edge wins."""
    e = g.edge_array
    bi, bj = counts[e[:, 0]].astype(float), counts[e[:, 1]].astype(float)
    unit = alphas == 1.0
    return np.where(unit, bi / (bi + bj), 1.0 / (1.0 + np.exp(alphas * (np.log(bj) - np.log(bi)))))


def step(state: UrnState, g: Graph | Hypergraph, spec: FieldSpec,
         rng: np.random.Generator) -> tuple[UrnState, StepDecomposition]:
    """Add one ball per edge; return the new state and the step's decomposition."""
    counts = np.asarray(state.counts, dtype=np.int64)
    _check_counts(g, counts)
    n, m, N = state.step, g.m, g.N
    if state.total + N > MAX_TOTAL:
        raise UrnOverflowError("ball total would exceed 2**53")
    u = rng.random(N)
    added = np.zeros(m, dtype=np.int64)
    mean = np.zeros(m)
    if isinstance(g, Hypergraph):
        spec.check(g)
        winners = np.empty(N, dtype=np.int64)
        slot = np.empty(N, dtype=np.int64)
        for k, e in enumerate(g.hyperedges):
            b = counts[list(e)].astype(float)
            tot = b.sum()
            mean[list(e)] += b / tot
            cum = np.cumsum(b)
            pos = int(np.searchsorted(cum, u[k] * tot, side="right"))
            pos = min(pos, len(e) - 1)
            slot[k] = pos
            winners[k] = e[pos]
        np.add.at(added, winners, 1)
        indicators = slot
    else:
        alphas = spec.exponents(g)
        e = g.edge_array
        p = _edge_probabilities(counts, g, alphas)
        bi, bj = counts[e[:, 0]], counts[e[:, 1]]
        # exponent 1: compare u*(B_i+B_j) < B_i instead of forming the ratio
        first = np.where(alphas == 1.0, u * (bi + bj) < bi, u < p)
        winners = np.where(first, e[:, 0], e[:, 1])
        np.add.at(added, winners, 1)
        mean += np.bincount(e[:, 0], p, m) + np.bincount(e[:, 1], 1.0 - p, m)
        indicators = first.astype(np.int64)
    xi = added / N
    exp_xi = mean / N
    dec = StepDecomposition(
        gamma=gamma(n, state.initial_total, N),
        xi=xi,
        noise=xi - exp_xi,
        expected_xi=exp_xi,
        indicators=indicators,
        winners=winners,
    )
    return UrnState(counts + added, n + 1, state.initial_total), dec


# --- compiled kernels -------------------------------------------------------

@numba.njit(nogil=True, cache=True)
def _advance_graph(counts, noise_sum, ei, ej, alphas, uniforms, n0_over_n, step0):
    m = counts.shape[0]
    n_edges = ei.shape[0]
    logs = np.empty(m)
    added = np.zeros(m, dtype=np.int64)
    mean = np.zeros(m)
    for s in range(uniforms.shape[0]):
        for i in range(m):
            logs[i] = np.log(counts[i])
            added[i] = 0
            mean[i] = 0.0
        for k in range(n_edges):
            i = ei[k]
            j = ej[k]
            a = alphas[k]
            u = uniforms[s, k]
            if a == 1.0:
                bi = float(counts[i])
                bj = float(counts[j])
                p = bi / (bi + bj)
                first = u * (bi + bj) < bi
            else:
                p = 1.0 / (1.0 + np.exp(a * (logs[j] - logs[i])))
                first = u < p
            if first:
                added[i] += 1
            else:
                added[j] += 1
            mean[i] += p
            mean[j] += 1.0 - p
        g = 1.0 / (n0_over_n + step0 + s + 1)
        for i in range(m):
            noise_sum[i] += g * (added[i] - mean[i]) / n_edges
            counts[i] += added[i]


@numba.njit(nogil=True, cache=True)
def _advance_hyper(counts, noise_sum, members, sizes, uniforms, n0_over_n, step0):
    m = counts.shape[0]
    n_edges = sizes.shape[0]
    added = np.zeros(m, dtype=np.int64)
    mean = np.zeros(m)
    for s in range(uniforms.shape[0]):
        for i in range(m):
            added[i] = 0
            mean[i] = 0.0
        for k in range(n_edges):
            tot = 0.0
            for r in range(sizes[k]):
                tot += counts[members[k, r]]
            target = uniforms[s, k] * tot
            cum = 0.0
            win = members[k, sizes[k] - 1]
            found = False
            for r in range(sizes[k]):
                v = members[k, r]
                mean[v] += counts[v] / tot
                cum += counts[v]
                if not found and cum > target:
                    win = v
                    found = True
            added[win] += 1
        g = 1.0 / (n0_over_n + step0 + s + 1)
        for i in range(m):
            noise_sum[i] += g * (added[i] - mean[i]) / n_edges
            counts[i] += added[i]


# --- trajectories -------------------------------------------------------------

def geometric_checkpoints(n_steps: int, first_power: int = 0, include_zero: bool = True) -> list[int]:
    """``[0,] 2^first_power, 2^(first_power+1), ... < n_steps`` followed by ``n_steps``."""
    pts = [0] if include_zero else []
    k = first_power
    while 2**k < n_steps:
        pts.append(2**k)
        k += 1
    if n_steps not in pts:
        pts.append(n_steps)
    return pts


@dataclass
class UrnTrajectory:
    steps: np.ndarray        # checkpoint step numbers
    x: np.ndarray            # proportions at each checkpoint, shape (len(steps), m)
    noise_sums: np.ndarray   # sum_{i < step} gamma_i u_i at each checkpoint
    final: UrnState

    @property
    def final_proportions(self) -> np.ndarray:
        return proportions(self.final)


CHUNK = 1 << 14


def simulate(g: Graph | Hypergraph, spec: FieldSpec, initial_counts=None, n_steps: int = 1,
             rng: np.random.Generator | None = None,
             checkpoints: Iterable[int] | None = None) -> UrnTrajectory:
    """Run ``n_steps`` steps, recording proportions and cumulative noise at checkpoints.

    Parameters
    ----------
    initial_counts
        ``B(0)``; defaults to one ball per bin.
    rng
        Source of uniforms; defaults to ``RngSpec(0).generator()``.
    checkpoints
        Steps at which to record; default is ``0, 1, 2, 4, ...`` plus ``n_steps``.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    rng = rng if rng is not None else RngSpec(0).generator()
    state = UrnState.initial(g.m if initial_counts is None else initial_counts)
    _check_counts(g, state.counts)
    if state.initial_total + n_steps * g.N > MAX_TOTAL:
        raise UrnOverflowError(f"{n_steps} steps would push the ball total past 2**53")
    marks = sorted(set(geometric_checkpoints(n_steps) if checkpoints is None else checkpoints))
    if marks and (marks[0] < 0 or marks[-1] > n_steps):
        raise ValueError("checkpoints must lie in [0, n_steps]")

    counts = np.array(state.counts, dtype=np.int64)
    noise = np.zeros(g.m)
    n0_over_n = state.initial_total / g.N
    if isinstance(g, Hypergraph):
        spec.check(g)
        members, sizes = g.padded()
    else:
        if spec.variant == HYPERGRAPH:
            spec.check(g)
        e = g.edge_array
        ei, ej = np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])
        alphas = spec.exponents(g)

    xs, ns = [], []
    done = 0
    for mark in marks + [n_steps]:
        while done < mark:
            block = min(CHUNK, mark - done)
            u = rng.random((block, g.N))
            if isinstance(g, Hypergraph):
                _advance_hyper(counts, noise, members, sizes, u, n0_over_n, done)
            else:
                _advance_graph(counts, noise, ei, ej, alphas, u, n0_over_n, done)
            done += block
        if len(xs) < len(marks):
            xs.append(counts / float(counts.sum()))
            ns.append(noise.copy())
    m = g.m
    return UrnTrajectory(
        steps=np.array(marks, dtype=np.int64),
        x=np.array(xs).reshape(-1, m),
        noise_sums=np.array(ns).reshape(-1, m),
        final=UrnState(counts, n_steps, state.initial_total),
    )
