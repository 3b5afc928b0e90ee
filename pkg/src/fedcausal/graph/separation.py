"""Graphical separation oracles (d-separation in DAGs, m-separation in MAGs).

Both use the same reachability search over ``(node, arrived-through-arrowhead)``
states: a node may be passed as a collider only if it is an ancestor of the
conditioning set, and as a non-collider only if it is not conditioned on.
"""

from __future__ import annotations

from typing import Iterable

from .types import CausalDag, GraphError, Mag, Mark, _MarkedGraph


def _validate(g: _MarkedGraph, x: int, y: int, cond: Iterable[int]) -> frozenset[int]:
    cond = frozenset(int(c) for c in cond)
    g.check_node(x, y, *cond)
    if x == y:
        raise GraphError("separation query needs two distinct nodes")
    if x in cond or y in cond:
        raise GraphError("queried nodes may not appear in the conditioning set")
    return cond


def _connected(g: _MarkedGraph, x: int, y: int, cond: frozenset[int]) -> bool:
    marks = g.marks
    anc = g.ancestors(cond)
    nbrs = [g.neighbors(v) for v in range(g.d)]
    start = [(w, marks[x, w] == Mark.ARROW) for w in nbrs[x]]
    seen = set(start)
    stack = list(start)
    while stack:
        w, into = stack.pop()
        if w == y:
            return True
        for v in nbrs[w]:
            collider = into and marks[v, w] == Mark.ARROW
            if collider and w not in anc:
                continue
            if not collider and w in cond:
                continue
            state = (v, bool(marks[w, v] == Mark.ARROW))
            if state not in seen:
                seen.add(state)
                stack.append(state)
    return False


def d_separated(g: CausalDag, x: int, y: int, cond: Iterable[int] = ()) -> bool:
    """True iff ``x`` and ``y`` are d-separated given ``cond`` in the DAG ``g``."""
    cond = _validate(g, x, y, cond)
    return not _connected(g, x, y, cond)


def m_separated(m: Mag, x: int, y: int, cond: Iterable[int] = ()) -> bool:
    """True iff ``x`` and ``y`` are m-separated given ``cond`` in the MAG ``m``."""
    cond = _validate(m, x, y, cond)
    return not _connected(m, x, y, cond)
