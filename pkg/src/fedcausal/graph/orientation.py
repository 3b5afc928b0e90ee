"""Orientation rules operating in place on a mutable mark matrix.

Convention as everywhere in the package: ``M[i, j]`` is the mark at ``j`` on
the edge ``i - j``.  The Meek rules expect a PDAG (tail/arrow marks only); the
FCI rules expect a partially oriented PAG and implement R1-R4 and R8-R10
(no selection variables, so R5-R7 never apply).
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Iterator

import numpy as np

from .types import Mark

TAIL, ARROW, CIRCLE, NONE = int(Mark.TAIL), int(Mark.ARROW), int(Mark.CIRCLE), int(Mark.NONE)


def unshielded_triples(adj: np.ndarray) -> Iterator[tuple[int, int, int]]:
    """Yield ``(x, z, y)`` with ``x - z - y``, ``x < y`` and ``x``, ``y`` non-adjacent.

    Triples come out ordered by ``(z, x, y)``.
    """
    d = adj.shape[0]
    for z in range(d):
        nbrs = np.flatnonzero(adj[z]).tolist()
        for x, y in combinations(nbrs, 2):
            if not adj[x, y]:
                yield x, z, y


def _directed(M, a, b) -> bool:
    return M[a, b] == ARROW and M[b, a] == TAIL


def _undirected(M, a, b) -> bool:
    return M[a, b] == TAIL and M[b, a] == TAIL


def _nbrs(M, v) -> list[int]:
    return np.flatnonzero(M[v] != NONE).tolist()


def _orient(M, a, b) -> None:
    M[a, b] = ARROW
    M[b, a] = TAIL


# --------------------------------------------------------------------------
# Meek rules (CPDAG completion)
# --------------------------------------------------------------------------


def _meek_pass(M) -> bool:
    d = M.shape[0]
    changed = False
    for a in range(d):
        for b in _nbrs(M, a):
            if not _undirected(M, a, b):
                continue
            na = _nbrs(M, a)
            nb = set(_nbrs(M, b))
            # R1: c -> a - b, c and b non-adjacent
            if any(_directed(M, c, a) and c != b and c not in nb for c in na):
                _orient(M, a, b)
                changed = True
                continue
            # R2: a -> c -> b, a - b
            if any(_directed(M, a, c) and _directed(M, c, b) for c in na):
                _orient(M, a, b)
                changed = True
                continue
            # R3: a - c -> b, a - w -> b, c and w non-adjacent
            cands = [c for c in na if c != b and _undirected(M, a, c) and _directed(M, c, b)]
            if any(M[c, w] == NONE for c, w in combinations(cands, 2)):
                _orient(M, a, b)
                changed = True
                continue
            # R4: a - c -> w -> b, a adjacent to w, c and b non-adjacent
            hit = False
            for c in na:
                if c == b or not _undirected(M, a, c) or c in nb:
                    continue
                for w in _nbrs(M, c):
                    if w != a and _directed(M, c, w) and _directed(M, w, b) and M[a, w] != NONE:
                        hit = True
                        break
                if hit:
                    break
            if hit:
                _orient(M, a, b)
                changed = True
    return changed


def apply_meek(M: np.ndarray) -> np.ndarray:
    """Apply Meek's rules R1-R4 to a fixed point."""
    while _meek_pass(M):
        pass
    return M


# --------------------------------------------------------------------------
# FCI rules (PAG completion)
# --------------------------------------------------------------------------

NonCollider = Callable[[int, int, int, int], bool]


def _r1(M) -> bool:
    # a *-> b o-* c, a and c non-adjacent  =>  b -> c
    changed = False
    d = M.shape[0]
    for b in range(d):
        for c in _nbrs(M, b):
            if M[c, b] != CIRCLE:
                continue
            for a in _nbrs(M, b):
                if a != c and M[a, b] == ARROW and M[a, c] == NONE:
                    M[c, b] = TAIL
                    M[b, c] = ARROW
                    changed = True
                    break
    return changed


def _r2(M) -> bool:
    # (a -> b *-> c  or  a *-> b -> c) and a *-o c  =>  a *-> c
    changed = False
    d = M.shape[0]
    for a in range(d):
        for c in _nbrs(M, a):
            if M[a, c] != CIRCLE:
                continue
            for b in _nbrs(M, a):
                if b == c or M[b, c] == NONE:
                    continue
                if (_directed(M, a, b) and M[b, c] == ARROW) or (M[a, b] == ARROW and _directed(M, b, c)):
                    M[a, c] = ARROW
                    changed = True
                    break
    return changed


def _r3(M) -> bool:
    # a *-> b <-* c, a *-o t o-* c, a and c non-adjacent, t *-o b  =>  t *-> b
    changed = False
    d = M.shape[0]
    for t in range(d):
        for b in _nbrs(M, t):
            if M[t, b] != CIRCLE:
                continue
            cands = [v for v in _nbrs(M, t) if v != b and M[v, t] == CIRCLE and M[v, b] == ARROW]
            for a, c in combinations(cands, 2):
                if M[a, c] == NONE:
                    M[t, b] = ARROW
                    changed = True
                    break
    return changed


def _discriminating_start(M, a, b, c) -> int | None:
    """End node ``theta`` of a discriminating path ``<theta, ..., a, b, c>`` for ``b``."""
    if not (M[b, a] == ARROW and _directed(M, a, c)):
        return None
    seen = {a, b, c}
    queue = [a]
    while queue:
        v = queue.pop(0)
        for t in _nbrs(M, v):
            if t in seen or M[t, v] != ARROW:
                continue
            if M[t, c] == NONE:
                return t
            if M[v, t] == ARROW and _directed(M, t, c):
                seen.add(t)
                queue.append(t)
    return None


def _r4(M, noncollider: NonCollider) -> bool:
    changed = False
    d = M.shape[0]
    for b in range(d):
        for c in _nbrs(M, b):
            if M[c, b] != CIRCLE:
                continue
            for a in _nbrs(M, b):
                if a == c or M[a, c] == NONE:
                    continue
                theta = _discriminating_start(M, a, b, c)
                if theta is None:
                    continue
                if noncollider(theta, a, b, c):
                    M[c, b] = TAIL
                    M[b, c] = ARROW
                else:
                    M[a, b] = M[b, a] = ARROW
                    M[c, b] = M[b, c] = ARROW
                changed = True
                break
    return changed


def _pd_step(M, u, v) -> bool:
    # edge u *-* v can lie on a potentially directed path from u to v
    return M[v, u] != ARROW and M[u, v] != TAIL


def _uncovered_pd_first_nodes(M, a, target, exclude=frozenset(), skip_adjacent_to=None):
    """First nodes after ``a`` of uncovered potentially directed paths ``a ~> target``.

    ``skip_adjacent_to`` restricts to paths with at least two edges whose first node
    is non-adjacent to ``skip_adjacent_to`` (used by R9).
    """
    firsts = set()
    for first in _nbrs(M, a):
        if first in exclude or not _pd_step(M, a, first):
            continue
        if skip_adjacent_to is not None:
            if first == target or M[first, skip_adjacent_to] != NONE:
                continue
        if first == target:
            firsts.add(first)
            continue
        # depth-first over simple uncovered pd paths
        stack = [(first, a, (a, first))]
        found = False
        while stack and not found:
            v, prev, path = stack.pop()
            for w in _nbrs(M, v):
                if w in path or w in exclude or not _pd_step(M, v, w):
                    continue
                if M[prev, w] != NONE:
                    continue  # covered triple
                if w == target:
                    found = True
                    break
                stack.append((w, v, path + (w,)))
        if found:
            firsts.add(first)
    return firsts


def _r8(M) -> bool:
    # (a -> b -> c  or  a -o b -> c) and a o-> c  =>  a -> c
    changed = False
    d = M.shape[0]
    for a in range(d):
        for c in _nbrs(M, a):
            if not (M[c, a] == CIRCLE and M[a, c] == ARROW):
                continue
            for b in _nbrs(M, a):
                if b == c or not _directed(M, b, c):
                    continue
                if _directed(M, a, b) or (M[b, a] == TAIL and M[a, b] == CIRCLE):
                    M[c, a] = TAIL
                    changed = True
                    break
    return changed


def _r9(M) -> bool:
    # a o-> c and an uncovered pd path <a, b, t, ..., c> with b, c non-adjacent  =>  a -> c
    changed = False
    d = M.shape[0]
    for a in range(d):
        for c in _nbrs(M, a):
            if not (M[c, a] == CIRCLE and M[a, c] == ARROW):
                continue
            if _uncovered_pd_first_nodes(M, a, c, skip_adjacent_to=c):
                M[c, a] = TAIL
                changed = True
    return changed


def _r10(M) -> bool:
    # a o-> c, b -> c <- t, uncovered pd paths a ~> b and a ~> t whose first
    # nodes are distinct and non-adjacent  =>  a -> c
    changed = False
    d = M.shape[0]
    for a in range(d):
        for c in _nbrs(M, a):
            if not (M[c, a] == CIRCLE and M[a, c] == ARROW):
                continue
            parents = [v for v in _nbrs(M, c) if v != a and _directed(M, v, c)]
            firsts = {}
            for b, t in combinations(parents, 2):
                for v in (b, t):
                    if v not in firsts:
                        firsts[v] = _uncovered_pd_first_nodes(M, a, v, exclude=frozenset({c}))
                if any(mu != om and M[mu, om] == NONE for mu in firsts[b] for om in firsts[t]):
                    M[c, a] = TAIL
                    changed = True
                    break
    return changed


def apply_fci_rules(M: np.ndarray, noncollider: NonCollider) -> np.ndarray:
    """Apply FCI orientation rules R1-R4 and R8-R10 to a fixed point.

    ``noncollider(theta, a, b, c)`` decides R4: whether ``b`` is a non-collider
    on the discriminating path ``<theta, ..., a, b, c>`` (for a learner: ``b`` is
    in the separating set of ``theta`` and ``c``).
    """
    while True:
        changed = _r1(M) | _r2(M) | _r3(M) | _r4(M, noncollider)
        if changed:
            continue
        if not (_r8(M) | _r9(M) | _r10(M)):
            break
    return M
