"""Graph containers shared by the learners, the oracles and the metrics.

All three graph classes store edges in a ``d x d`` mark matrix where
``marks[i, j]`` is the endpoint mark *at node j* on the edge between ``i`` and
``j`` (``Mark.NONE`` when the nodes are not adjacent).  ``i -> j`` is therefore
``marks[i, j] == ARROW`` and ``marks[j, i] == TAIL``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np


class Mark(IntEnum):
    NONE = 0
    TAIL = 1
    ARROW = 2
    CIRCLE = 3


CPDAG = "CPDAG"
PAG = "PAG"


class GraphError(ValueError):
    """Raised for structurally invalid graphs or out-of-range node arguments."""


@dataclass(frozen=True)
class VariableMeta:
    name: str
    cardinality: int

    def __post_init__(self):
        if int(self.cardinality) < 2:
            raise ValueError(f"variable {self.name!r} needs cardinality >= 2, got {self.cardinality}")


def default_names(d: int) -> tuple[str, ...]:
    return tuple(f"X{i}" for i in range(d))


def _frozen(marks: np.ndarray) -> np.ndarray:
    out = np.array(marks, dtype=np.int8, copy=True)
    out.setflags(write=False)
    return out


def _check_names(names: Sequence[str] | None, d: int) -> tuple[str, ...]:
    if names is None:
        return default_names(d)
    names = tuple(names)
    if len(names) != d:
        raise GraphError(f"expected {d} node names, got {len(names)}")
    if len(set(names)) != d:
        raise GraphError("node names must be unique")
    return names


class _MarkedGraph:
    """Common read-only behaviour of mark-matrix graphs."""

    marks: np.ndarray
    names: tuple[str, ...]

    def _init_marks(self, marks, names, allowed: set[int]):
        marks = np.asarray(marks)
        if marks.ndim != 2 or marks.shape[0] != marks.shape[1]:
            raise GraphError("mark matrix must be square")
        d = marks.shape[0]
        if np.any(np.diag(marks) != Mark.NONE):
            raise GraphError("self-loops are not allowed")
        adj = marks != Mark.NONE
        if np.any(adj != adj.T):
            raise GraphError("mark matrix must describe symmetric adjacencies")
        bad = set(np.unique(marks).tolist()) - allowed - {int(Mark.NONE)}
        if bad:
            raise GraphError(f"marks {sorted(bad)} not allowed in {type(self).__name__}")
        self.marks = _frozen(marks)
        self.names = _check_names(names, d)

    @property
    def d(self) -> int:
        return self.marks.shape[0]

    def adjacent(self, i: int, j: int) -> bool:
        return self.marks[i, j] != Mark.NONE

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.marks[i] != Mark.NONE).tolist()

    def skeleton(self) -> np.ndarray:
        return self.marks != Mark.NONE

    def edges(self) -> Iterator[tuple[int, int, Mark, Mark]]:
        """Yield ``(i, j, mark_at_i, mark_at_j)`` once per adjacency, ``i < j``."""
        rows, cols = np.nonzero(np.triu(self.marks != Mark.NONE))
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j, Mark(int(self.marks[j, i])), Mark(int(self.marks[i, j]))

    def n_edges(self) -> int:
        return int(np.count_nonzero(self.marks)) // 2

    def check_node(self, *nodes: int) -> None:
        for v in nodes:
            if not 0 <= int(v) < self.d:
                raise GraphError(f"node index {v} out of range for {self.d} nodes")

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.names == other.names
            and getattr(self, "kind", None) == getattr(other, "kind", None)
            and np.array_equal(self.marks, other.marks)
        )

    def __hash__(self):
        return hash((type(self).__name__, self.names, self.marks.tobytes()))

    def __repr__(self):
        from .io import format_edge

        body = ", ".join(format_edge(self.names, e) for e in self.edges())
        return f"{type(self).__name__}({body})"


class CausalDag(_MarkedGraph):
    """Directed acyclic graph over ``d`` nodes."""

    def __init__(self, d: int, edges: Iterable[tuple[int, int]] = (), names: Sequence[str] | None = None):
        if d < 0:
            raise GraphError("node count must be non-negative")
        marks = np.zeros((d, d), dtype=np.int8)
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < d and 0 <= b < d):
                raise GraphError(f"edge ({a}, {b}) out of range")
            if a == b:
                raise GraphError("self-loops are not allowed")
            if marks[a, b] != Mark.NONE:
                raise GraphError(f"parallel edge between {a} and {b}")
            marks[a, b] = Mark.ARROW
            marks[b, a] = Mark.TAIL
        self._init_marks(marks, names, {int(Mark.TAIL), int(Mark.ARROW)})
        self._order = self._toposort()

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, names: Sequence[str] | None = None) -> "CausalDag":
        adj = np.asarray(adj)
        return cls(adj.shape[0], zip(*np.nonzero(adj)), names)

    def _toposort(self) -> tuple[int, ...]:
        indeg = [len(self.parents(v)) for v in range(self.d)]
        ready = deque(v for v in range(self.d) if indeg[v] == 0)
        order = []
        while ready:
            v = ready.popleft()
            order.append(v)
            for c in self.children(v):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != self.d:
            raise GraphError("graph contains a directed cycle")
        return tuple(order)

    @property
    def topological_order(self) -> tuple[int, ...]:
        return self._order

    @property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        rows, cols = np.nonzero(self.marks == Mark.ARROW)
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def adjacency_matrix(self) -> np.ndarray:
        return (self.marks == Mark.ARROW).astype(np.int8)

    def parents(self, v: int) -> list[int]:
        return np.flatnonzero(self.marks[:, v] == Mark.ARROW).tolist()

    def children(self, v: int) -> list[int]:
        return np.flatnonzero(self.marks[v] == Mark.ARROW).tolist()

    def ancestors(self, nodes: Iterable[int]) -> set[int]:
        """Ancestors of ``nodes``, each node counted as its own ancestor."""
        return _reach(self.marks, nodes, upward=True)

    def descendants(self, nodes: Iterable[int]) -> set[int]:
        return _reach(self.marks, nodes, upward=False)

    def to_mag(self) -> "Mag":
        return Mag(self.marks, self.names)

    def to_pattern(self) -> "Pattern":
        return Pattern(self.marks, CPDAG, self.names)


class Mag(_MarkedGraph):
    """Maximal ancestral graph with directed and bidirected edges only."""

    def __init__(self, marks: np.ndarray, names: Sequence[str] | None = None, check: bool = True):
        self._init_marks(marks, names, {int(Mark.TAIL), int(Mark.ARROW)})
        if np.any((self.marks == Mark.TAIL) & (self.marks.T == Mark.TAIL)):
            raise GraphError("undirected (selection) edges are not supported in MAGs")
        if check:
            self._check_ancestral()

    def _check_ancestral(self) -> None:
        directed = (self.marks == Mark.ARROW) & (self.marks.T == Mark.TAIL)
        d = self.d
        for v in range(d):
            anc = self.ancestors([v]) - {v}
            if any(directed[v, a] for a in anc):
                raise GraphError("MAG contains a directed cycle")
            for a in anc:
                if self.marks[a, v] == Mark.ARROW and self.marks[v, a] == Mark.ARROW:
                    raise GraphError("MAG contains an almost-directed cycle")

    def parents(self, v: int) -> list[int]:
        return np.flatnonzero((self.marks[:, v] == Mark.ARROW) & (self.marks[v] == Mark.TAIL)).tolist()

    def spouses(self, v: int) -> list[int]:
        return np.flatnonzero((self.marks[:, v] == Mark.ARROW) & (self.marks[v] == Mark.ARROW)).tolist()

    def ancestors(self, nodes: Iterable[int]) -> set[int]:
        return _reach(self.marks, nodes, upward=True)

    def descendants(self, nodes: Iterable[int]) -> set[int]:
        return _reach(self.marks, nodes, upward=False)


class Pattern(_MarkedGraph):
    """Equivalence-class representation: a CPDAG or a PAG.

    CPDAG undirected edges are stored tail-tail; circles only appear in PAGs.
    """

    def __init__(self, marks: np.ndarray, kind: str = CPDAG, names: Sequence[str] | None = None):
        if kind not in (CPDAG, PAG):
            raise GraphError(f"unknown pattern kind {kind!r}")
        allowed = {int(Mark.TAIL), int(Mark.ARROW)}
        if kind == PAG:
            allowed.add(int(Mark.CIRCLE))
        self._init_marks(marks, names, allowed)
        self.kind = kind

    @classmethod
    def empty(cls, d: int, kind: str = CPDAG, names: Sequence[str] | None = None) -> "Pattern":
        return cls(np.zeros((d, d), dtype=np.int8), kind, names)

    def directed_edges(self) -> set[tuple[int, int]]:
        return {
            (i, j) if mj == Mark.ARROW else (j, i)
            for i, j, mi, mj in self.edges()
            if {mi, mj} == {Mark.TAIL, Mark.ARROW}
        }

    def undirected_edges(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, mi, mj in self.edges() if mi == mj == Mark.TAIL}


def _reach(marks: np.ndarray, nodes: Iterable[int], upward: bool) -> set[int]:
    # i -> j  <=>  marks[i, j] == ARROW and marks[j, i] == TAIL
    directed = (marks == Mark.ARROW) & (marks.T == Mark.TAIL)
    step = directed.T if upward else directed
    seen = set(int(v) for v in nodes)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for w in np.flatnonzero(step[v]).tolist():
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def random_er_dag(d: int, edge_prob: float | None = None, seed: int = 0,
                  names: Sequence[str] | None = None) -> CausalDag:
    """Erdős–Rényi DAG: random topological order, each forward pair kept with ``edge_prob``.

    ``edge_prob`` defaults to ``2 / (d - 1)``, i.e. an expected degree of 2.
    """
    if d <= 0:
        raise GraphError("a random DAG needs at least one node")
    if edge_prob is None:
        edge_prob = min(1.0, 2.0 / (d - 1)) if d > 1 else 0.0
    if not 0.0 <= edge_prob <= 1.0:
        raise GraphError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(d)
    keep = np.triu(rng.random((d, d)) < edge_prob, k=1)
    edges = [(int(order[i]), int(order[j])) for i, j in zip(*np.nonzero(keep))]
    return CausalDag(d, edges, names)
