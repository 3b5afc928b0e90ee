"""PC-stable skeleton search, v-structure orientation and CPDAG completion."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from ..graph import CPDAG, GraphError, Mark, Pattern
from ..graph.orientation import apply_meek, unshielded_triples
from .oracle import CiOracle

SepSets = dict  # frozenset({x, y}) -> tuple of separating variables

UNLIMITED_UP_TO = 20
DEFAULT_MAX_COND = 3
AUTO = "auto"


def default_max_cond(d: int) -> int | None:
    """Unlimited conditioning sets up to 20 variables, 3 beyond."""
    return None if d <= UNLIMITED_UP_TO else DEFAULT_MAX_COND


@dataclass
class LearnResult:
    pattern: Pattern
    sepsets: SepSets = field(default_factory=dict)
    conflicts: int = 0
    n_tests: int = 0
    n_invalid: int = 0
    queries: list = field(default_factory=list)

    def manifest(self) -> dict:
        """JSON-ready record of every executed test and the separating sets."""
        return {
            "kind": self.pattern.kind,
            "names": list(self.pattern.names),
            "conflicts": self.conflicts,
            "n_tests": self.n_tests,
            "n_invalid": self.n_invalid,
            "sepsets": [{"pair": sorted(pair), "cond": list(s)} for pair, s in
                        sorted(self.sepsets.items(), key=lambda kv: sorted(kv[0]))],
            "queries": [r.to_dict() for r in self.queries],
        }


def _result(pattern, sepsets, oracle: CiOracle | None, conflicts=0) -> LearnResult:
    if oracle is None:
        return LearnResult(pattern, sepsets, conflicts)
    return LearnResult(pattern, sepsets, conflicts, oracle.n_tests, oracle.invalid_count(), list(oracle.log))


def _check_d(d: int) -> None:
    if d < 2:
        raise GraphError("structure learning needs at least two variables")


def skeleton(oracle: CiOracle, d: int, max_cond: int | None = None,
             adj: np.ndarray | None = None) -> tuple[np.ndarray, SepSets]:
    """PC-stable adjacency search from the complete graph (or from ``adj``).

    At level ``k`` every remaining edge ``x - y`` is tested against size-``k``
    subsets of the neighbours of ``x`` and then of ``y``, both taken from the
    snapshot at the start of the level.  The first independence removes the
    edge and records its separating set.
    """
    _check_d(d)
    adj = np.ones((d, d), dtype=bool) if adj is None else adj.astype(bool).copy()
    np.fill_diagonal(adj, False)
    sepsets: SepSets = {}
    level = 0
    while max_cond is None or level <= max_cond:
        snapshot = [np.flatnonzero(adj[v]).tolist() for v in range(d)]
        if all(len(nb) - 1 < level for nb in snapshot):
            break
        for x, y in combinations(range(d), 2):
            if not adj[x, y]:
                continue
            tried = set()
            for a, b in ((x, y), (y, x)):
                pool = [v for v in snapshot[a] if v != b]
                for cond in combinations(pool, level):
                    key = frozenset(cond)
                    if key in tried:
                        continue
                    tried.add(key)
                    if oracle(x, y, cond):
                        adj[x, y] = adj[y, x] = False
                        sepsets[frozenset((x, y))] = tuple(sorted(cond))
                        break
                if not adj[x, y]:
                    break
        level += 1
    return adj, sepsets


def orient_v_structures(M: np.ndarray, adj: np.ndarray, sepsets: SepSets, bidirected: bool = False) -> int:
    """Orient every unshielded ``x - z - y`` with ``z`` outside ``sepset(x, y)`` as a collider.

    Triples are visited in canonical ``(z, x, y)`` order.  Unless
    ``bidirected`` edges are allowed (PAGs), a triple whose orientation would
    reverse an arrowhead committed by an earlier triple is skipped; the number
    of such triples is returned.
    """
    conflicts = 0
    for x, z, y in unshielded_triples(adj):
        if z in sepsets.get(frozenset((x, y)), ()):
            continue
        if not bidirected and (M[z, x] == Mark.ARROW or M[z, y] == Mark.ARROW):
            conflicts += 1
            continue
        M[x, z] = M[y, z] = Mark.ARROW
    return conflicts


def orient_pc(adj: np.ndarray, sepsets: SepSets, names: Sequence[str] | None = None) -> tuple[Pattern, int]:
    """CPDAG from a skeleton and its separating sets; returns ``(pattern, conflicts)``."""
    M = np.where(adj, Mark.TAIL, Mark.NONE).astype(np.int8)
    conflicts = orient_v_structures(M, adj, sepsets)
    apply_meek(M)
    return Pattern(M, CPDAG, names), conflicts


def resolve_max_cond(max_cond, d: int) -> int | None:
    return default_max_cond(d) if max_cond == AUTO else max_cond


def pc_learn(oracle: CiOracle, d: int, max_cond=AUTO, names: Sequence[str] | None = None) -> LearnResult:
    """PC-stable with Meek completion.  ``max_cond="auto"`` picks the size-based default."""
    max_cond = resolve_max_cond(max_cond, d)
    adj, sepsets = skeleton(oracle, d, max_cond)
    pattern, conflicts = orient_pc(adj, sepsets, names)
    return _result(pattern, sepsets, oracle, conflicts)
