"""Interaction topologies: simple connected graphs and hypergraphs.

Vertices are 0-based inside the library. Every text format (edge lists,
generator strings, CSV/JSON reports) uses 1-based labels.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for invalid graph input."""

    kind = "invalid"


class SelfLoopError(GraphError):
    kind = "self-loop"


class DuplicateEdgeError(GraphError):
    kind = "duplicate edge"


class LabelRangeError(GraphError):
    kind = "out-of-range label"


class DisconnectedError(GraphError):
    kind = "disconnected"


class GraphSizeError(GraphError):
    kind = "invalid size"


def _connected(m: int, groups: Iterable[Sequence[int]]) -> bool:
    adj: list[set[int]] = [set() for _ in range(m)]
    for grp in groups:
        for a in grp:
            adj[a].update(b for b in grp if b != a)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == m


@dataclass(frozen=True)
class Graph:
    """Finite simple connected graph on vertices ``0..m-1``.

    Construction validates everything; a ``Graph`` that exists is simple
    and connected. Edge order is kept as given.
    """

    m: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise GraphSizeError(f"need at least 2 vertices, got {self.m}")
        seen = set()
        norm = []
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise LabelRangeError(f"edge {i + 1} {j + 1}: label outside 1..{self.m}")
            if i == j:
                raise SelfLoopError(f"self-loop at vertex {i + 1}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DuplicateEdgeError(f"duplicate edge {i + 1} {j + 1}")
            seen.add(key)
            norm.append((i, j))
        object.__setattr__(self, "edges", tuple(norm))
        if not _connected(self.m, self.edges):
            raise DisconnectedError("graph is disconnected")

    @property
    def N(self) -> int:
        return len(self.edges)

    @property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.m, self.m), dtype=np.int64)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1
        return adj

    def edge_index(self, i: int, j: int) -> int:
        """Position of the unordered edge ``{i, j}`` in ``edges``."""
        key = {i, j}
        for k, (a, b) in enumerate(self.edges):
            if {a, b} == key:
                return k
        raise KeyError((i, j))

    def to_text(self) -> str:
        lines = [str(self.m)] + [f"{i + 1} {j + 1}" for i, j in self.edges]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Hypergraph:
    """Hypergraph on ``0..m-1``; each hyperedge holds at least two vertices."""

    m: int
    hyperedges: tuple[tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise GraphSizeError(f"need at least 2 vertices, got {self.m}")
        if not self.hyperedges:
            raise GraphSizeError("hypergraph has no hyperedges")
        norm = []
        for e in self.hyperedges:
            members = tuple(sorted(int(v) for v in e))
            if any(not 0 <= v < self.m for v in members):
                raise LabelRangeError(f"hyperedge {[v + 1 for v in members]}: label outside 1..{self.m}")
            if len(set(members)) != len(members):
                raise DuplicateEdgeError(f"hyperedge {[v + 1 for v in members]} repeats a vertex")
            if len(members) < 2:
                raise GraphSizeError("hyperedges need at least 2 distinct vertices")
            norm.append(members)
        object.__setattr__(self, "hyperedges", tuple(norm))
        covered = set().union(*map(set, norm))
        if len(covered) != self.m or not _connected(self.m, norm):
            raise DisconnectedError("hypergraph is disconnected or leaves a vertex uncovered")

    @property
    def N(self) -> int:
        return len(self.hyperedges)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        for e in self.hyperedges:
            deg[list(e)] += 1
        return deg

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """Members as an ``(N, kmax)`` array padded with -1, plus sizes."""
        sizes = np.array([len(e) for e in self.hyperedges], dtype=np.int64)
        out = -np.ones((self.N, int(sizes.max())), dtype=np.int64)
        for k, e in enumerate(self.hyperedges):
            out[k, : len(e)] = e
        return out, sizes


@dataclass(frozen=True)
class BipartitionInfo:
    is_bipartite: bool
    part_a: frozenset[int] = frozenset()
    part_b: frozenset[int] = frozenset()

    @property
    def balanced(self) -> bool:
        return self.is_bipartite and len(self.part_a) == len(self.part_b)


@dataclass(frozen=True)
class GraphReport:
    bipartition: BipartitionInfo
    is_regular: bool
    degree: int | None
    star_center: int | None

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition.is_bipartite

    @property
    def is_star(self) -> bool:
        return self.star_center is not None


def bipartition(g: Graph) -> BipartitionInfo:
    """BFS 2-colouring from vertex 0; ``part_a`` always contains vertex 0."""
    color = [-1] * g.m
    color[0] = 0
    adj = [g.neighbors(i) for i in range(g.m)]
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if color[w] < 0:
                color[w] = 1 - color[v]
                queue.append(w)
            elif color[w] == color[v]:
                return BipartitionInfo(False)
    a = frozenset(i for i in range(g.m) if color[i] == 0)
    b = frozenset(i for i in range(g.m) if color[i] == 1)
    return BipartitionInfo(True, a, b)


def analyze(g: Graph) -> GraphReport:
    deg = g.degrees
    regular = bool(np.all(deg == deg[0]))
    center = None
    if g.m >= 3 and g.N == g.m - 1:
        hubs = np.flatnonzero(deg == g.m - 1)
        if len(hubs) == 1:
            center = int(hubs[0])
    return GraphReport(
        bipartition=bipartition(g),
        is_regular=regular,
        degree=int(deg[0]) if regular else None,
        star_center=center,
    )


# --- construction ---------------------------------------------------------

def parse_graph(text: str) -> Graph:
    """Parse an edge-list document: first line ``m``, then ``i j`` per edge.

    Blank lines and ``#`` comments are ignored. Labels are 1-based.
    """
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or len(rows[0]) != 1:
        raise GraphError("first line must hold the vertex count m")
    try:
        m = int(rows[0][0])
        pairs = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as exc:
        raise GraphError(f"malformed edge list: {exc}") from None
    for a, b in pairs:
        if not (1 <= a <= m and 1 <= b <= m):
            raise LabelRangeError(f"edge {a} {b}: label outside 1..{m}")
    return Graph(m, tuple((a - 1, b - 1) for a, b in pairs))


def parse_hypergraph(text: str) -> Hypergraph:
    """First line ``m``; each further line lists the 1-based members of a hyperedge."""
    rows = [raw.split("#", 1)[0].split() for raw in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or len(rows[0]) != 1:
        raise GraphError("first line must hold the vertex count m")
    m = int(rows[0][0])
    return Hypergraph(m, tuple(tuple(int(v) - 1 for v in r) for r in rows[1:]))


FAMILIES = ("complete", "cycle", "path", "star", "complete_bipartite")


def generate(family: str, *sizes: int) -> Graph:
    """Canonically labelled member of a standard family.

    ``star(m)`` puts the centre at the last vertex (label ``m``);
    ``complete_bipartite(a, b)`` uses ``0..a-1`` for the first part.
    """
    if family == "complete":
        (m,) = sizes
        if m < 2:
            raise GraphSizeError("complete graph needs m >= 2")
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    elif family == "cycle":
        (m,) = sizes
        if m < 3:
            raise GraphSizeError("cycle needs m >= 3")
        edges = [(i, (i + 1) % m) for i in range(m)]
    elif family == "path":
        (m,) = sizes
        if m < 2:
            raise GraphSizeError("path needs m >= 2")
        edges = [(i, i + 1) for i in range(m - 1)]
    elif family == "star":
        (m,) = sizes
        if m < 2:
            raise GraphSizeError("star needs m >= 2")
        edges = [(i, m - 1) for i in range(m - 1)]
    elif family == "complete_bipartite":
        a, b = sizes
        if a < 1 or b < 1:
            raise GraphSizeError("complete bipartite parts must be nonempty")
        m = a + b
        edges = [(i, a + j) for i in range(a) for j in range(b)]
    else:
        raise GraphError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return Graph(m, tuple(edges), name=":".join([family, *map(str, sizes)]))


def one_edge_hypergraph(m: int) -> Hypergraph:
    return Hypergraph(m, (tuple(range(m)),), name=f"hyper:one-edge:{m}")


def from_spec(text: str) -> Graph | Hypergraph:
    """Resolve a generator string such as ``complete:5``, ``star:4``,
    ``complete_bipartite:3:3`` or ``hyper:one-edge:4``."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "hyper":
            if len(parts) == 3 and parts[1] == "one-edge":
                return one_edge_hypergraph(int(parts[2]))
            raise GraphError(f"unknown hypergraph generator {text!r}")
        return generate(parts[0], *(int(p) for p in parts[1:]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"bad generator string {text!r}: {exc}") from None
