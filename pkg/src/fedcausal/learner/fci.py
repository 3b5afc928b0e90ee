"""FCI: PC-style skeleton, Possible-D-SEP pruning, collider orientation and the FCI rules."""

from __future__ import annotations

from collections import deque
from itertools import combinations
from typing import Sequence

import numpy as np

from ..graph import PAG, Mark, Pattern
from ..graph.orientation import apply_fci_rules
from .oracle import CiOracle
from .pc import AUTO, LearnResult, SepSets, _result, orient_v_structures, resolve_max_cond, skeleton


def _circle_pattern(adj: np.ndarray, sepsets: SepSets) -> tuple[np.ndarray, int]:
    M = np.where(adj, Mark.CIRCLE, Mark.NONE).astype(np.int8)
    return M, orient_v_structures(M, adj, sepsets, bidirected=True)


def possible_dsep(M: np.ndarray, x: int) -> set[int]:
    """Nodes ``v`` reachable from ``x`` by a path on which every inner node is a
    collider or sits in a triangle with its two path neighbours."""
    adj = M != Mark.NONE
    seen = set()
    queue = deque()
    for b in np.flatnonzero(adj[x]):
        seen.add((x, int(b)))
        queue.append((x, int(b)))
    out = set()
    while queue:
        a, b = queue.popleft()
        out.add(b)
        for c in np.flatnonzero(adj[b]):
            c = int(c)
            if c == a or c == x or (b, c) in seen:
                continue
            collider = M[a, b] == Mark.ARROW and M[c, b] == Mark.ARROW
            if collider or adj[a, c]:
                seen.add((b, c))
                queue.append((b, c))
    out.discard(x)
    return out


def _pds_prune(oracle: CiOracle, M: np.ndarray, adj: np.ndarray, sepsets: SepSets, max_cond) -> bool:
    """Re-test every edge against subsets of Possible-D-SEP of either endpoint."""
    d = adj.shape[0]
    pds = [possible_dsep(M, v) for v in range(d)]
    removed = False
    for x, y in combinations(range(d), 2):
        if not adj[x, y]:
            continue
        done = False
        for a, b in ((x, y), (y, x)):
            pool = sorted(pds[a] - {a, b})
            top = len(pool) if max_cond is None else min(len(pool), max_cond)
            for k in range(1, top + 1):
                for cond in combinations(pool, k):
                    if oracle(x, y, cond):
                        adj[x, y] = adj[y, x] = False
                        sepsets[frozenset((x, y))] = tuple(cond)
                        done = removed = True
                        break
                if done:
                    break
            if done:
                break
    return removed


def fci_learn(oracle: CiOracle, d: int, max_cond=AUTO, names: Sequence[str] | None = None,
              pds: bool = True) -> LearnResult:
    """FCI returning a PAG.  ``pds=False`` skips the Possible-D-SEP pass."""
    max_cond = resolve_max_cond(max_cond, d)
    adj, sepsets = skeleton(oracle, d, max_cond)
    M, conflicts = _circle_pattern(adj, sepsets)
    if pds and _pds_prune(oracle, M, adj, sepsets, max_cond):
        M, conflicts = _circle_pattern(adj, sepsets)

    def noncollider(theta, a, b, c):
        return b in sepsets.get(frozenset((theta, c)), ())

    apply_fci_rules(M, noncollider)
    return _result(Pattern(M, PAG, names), sepsets, oracle, conflicts)
