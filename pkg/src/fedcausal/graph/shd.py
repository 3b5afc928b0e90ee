from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .types import GraphError, Pattern


@dataclass(frozen=True)
class ShdReport:
    shd: int
    missing: int
    extra: int
    mismatched: int

    def to_dict(self) -> dict:
        return asdict(self)


def shd(learned: Pattern, truth: Pattern) -> ShdReport:
    """Structural Hamming distance between two patterns over the same nodes.

    Each node pair costs at most 1: a differing adjacency counts as missing (in
    ``truth`` only) or extra (in ``learned`` only); a shared adjacency whose
    endpoint marks differ counts as a mismatch.
    """
    if learned.d != truth.d or learned.names != truth.names:
        raise GraphError("patterns must share the same node schema")
    if learned.kind != truth.kind:
        raise GraphError(f"cannot compare a {learned.kind} with a {truth.kind}")
    a, b = learned.marks, truth.marks
    upper = np.triu(np.ones_like(a, dtype=bool), k=1)
    adj_a, adj_b = (a != 0) & upper, (b != 0) & upper
    extra = int(np.count_nonzero(adj_a & ~adj_b))
    missing = int(np.count_nonzero(adj_b & ~adj_a))
    both = adj_a & adj_b
    differ = (a != b) | (a.T != b.T)
    mismatched = int(np.count_nonzero(both & differ))
    return ShdReport(missing + extra + mismatched, missing, extra, mismatched)
