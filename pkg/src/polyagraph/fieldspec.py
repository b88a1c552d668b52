"""Which reinforcement law drives the urn (and therefore the mean vector field)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph_model import Graph, Hypergraph

UNIFORM = "uniform"
PER_EDGE = "per_edge"
HYPERGRAPH = "hypergraph"


class FieldSpecError(ValueError):
    pass


def _check_exponent(a: float) -> float:
    a = float(a)
    if not (math.isfinite(a) and a > 0):
        raise FieldSpecError(f"exponent must be positive and finite, got {a}")
    return a


@dataclass(frozen=True)
class FieldSpec:
    """Reinforcement law.

    * ``uniform``: every edge uses ``B_i^a / (B_i^a + B_j^a)`` with one ``alpha``.
    * ``per_edge``: edge ``{i, j}`` uses its own exponent.
    * ``hypergraph``: hyperedge ``e`` picks ``i`` with probability ``B_i / sum_e B``.
    """

    variant: str
    alpha: float = 1.0
    edge_alphas: tuple[tuple[tuple[int, int], float], ...] = ()

    def __post_init__(self):
        if self.variant not in (UNIFORM, PER_EDGE, HYPERGRAPH):
            raise FieldSpecError(f"unknown variant {self.variant!r}")
        if self.variant == UNIFORM:
            _check_exponent(self.alpha)
        for _, a in self.edge_alphas:
            _check_exponent(a)

    @classmethod
    def uniform(cls, alpha: float) -> "FieldSpec":
        return cls(UNIFORM, alpha=_check_exponent(alpha))

    @classmethod
    def per_edge(cls, alphas: Mapping[tuple[int, int], float]) -> "FieldSpec":
        """Exponents keyed by 0-based unordered vertex pairs."""
        items = {}
        for (i, j), a in alphas.items():
            key = (min(i, j), max(i, j))
            if key in items:
                raise FieldSpecError(f"edge {i + 1}-{j + 1} given twice")
            items[key] = _check_exponent(a)
        return cls(PER_EDGE, alpha=float("nan"), edge_alphas=tuple(sorted(items.items())))

    @classmethod
    def hypergraph(cls) -> "FieldSpec":
        return cls(HYPERGRAPH, alpha=1.0)

    def check(self, g: Graph | Hypergraph) -> None:
        if isinstance(g, Hypergraph) != (self.variant == HYPERGRAPH):
            raise FieldSpecError(f"variant {self.variant!r} does not match {type(g).__name__}")
        if self.variant == PER_EDGE:
            want = {(min(i, j), max(i, j)) for i, j in g.edges}
            have = {k for k, _ in self.edge_alphas}
            if want != have:
                raise FieldSpecError("per-edge exponents must cover exactly the edge set")

    def exponents(self, g: Graph | Hypergraph) -> np.ndarray:
        """Exponent of each edge in ``g.edges`` order (ones for hypergraphs)."""
        self.check(g)
        if self.variant == PER_EDGE:
            table = dict(self.edge_alphas)
            return np.array([table[(min(i, j), max(i, j))] for i, j in g.edges])
        return np.full(g.N, float(self.alpha))

    def max_exponent(self, g: Graph | Hypergraph) -> float:
        return float(np.max(self.exponents(g)))

    def describe(self) -> dict:
        if self.variant == PER_EDGE:
            return {
                "variant": self.variant,
                "edge_alphas": [[i + 1, j + 1, a] for (i, j), a in self.edge_alphas],
            }
        return {"variant": self.variant, "alpha": self.alpha}
