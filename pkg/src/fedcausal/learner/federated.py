"""Federated learners and the voting baselines."""

from __future__ import annotations

from collections import Counter
from typing import Iterable

import numpy as np

from ..data import ClientPartition
from ..fedci import SKETCHED
from ..graph import CPDAG, PAG, Mark, Pattern
from .fci import fci_learn
from .oracle import chi2_oracle, cit_voting_oracle, fed_oracle
from .pc import AUTO, LearnResult, pc_learn


def _names(partition: ClientPartition):
    return tuple(v.name for v in partition.schema)


def fedpc(partition: ClientPartition, alpha: float = 0.05, l: int = 50, mode: str = SKETCHED, seed: int = 0,
          dropped: Iterable[int] = (), max_cond=AUTO) -> LearnResult:
    oracle = fed_oracle(partition, alpha, l, mode, seed, dropped)
    return pc_learn(oracle, oracle.d, max_cond, _names(partition))


def fedfci(partition: ClientPartition, alpha: float = 0.05, l: int = 50, mode: str = SKETCHED, seed: int = 0,
           dropped: Iterable[int] = (), max_cond=AUTO, pds: bool = True) -> LearnResult:
    oracle = fed_oracle(partition, alpha, l, mode, seed, dropped)
    return fci_learn(oracle, oracle.d, max_cond, _names(partition), pds)


def vote_patterns(patterns: list[Pattern], kind: str) -> Pattern:
    """Majority-vote adjacencies (present in more than half), then plurality marks.

    Ties between mark pairs leave the edge unoriented: ``-`` in a CPDAG,
    ``o-o`` in a PAG.
    """
    if not patterns:
        raise ValueError("nothing to vote on")
    d, names = patterns[0].d, patterns[0].names
    k = len(patterns)
    blank = Mark.TAIL if kind == CPDAG else Mark.CIRCLE
    M = np.zeros((d, d), dtype=np.int8)
    for i in range(d):
        for j in range(i + 1, d):
            ballots = Counter((int(p.marks[j, i]), int(p.marks[i, j])) for p in patterns if p.adjacent(i, j))
            if sum(ballots.values()) * 2 <= k:
                continue
            ranked = ballots.most_common()
            if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
                M[j, i] = M[i, j] = blank
            else:
                M[j, i], M[i, j] = ranked[0][0]
    return Pattern(M, kind, names)


def _voters(partition: ClientPartition, dropped: Iterable[int]):
    # empty clients have nothing to learn from and abstain
    dropped = set(dropped)
    return [c for i, c in enumerate(partition.clients) if i not in dropped and c.n > 0]


def _local_voting(partition, alpha, dropped, max_cond, learn, kind) -> LearnResult:
    names = _names(partition)
    local = [learn(chi2_oracle(c, alpha), c.d, max_cond, names) for c in _voters(partition, dropped)]
    if not local:
        raise ValueError("no client has data")
    out = LearnResult(vote_patterns([r.pattern for r in local], kind))
    out.n_tests = sum(r.n_tests for r in local)
    out.n_invalid = sum(r.n_invalid for r in local)
    return out


def pc_voting(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
              max_cond=AUTO) -> LearnResult:
    """Local PC on every client, then a vote over the local CPDAGs."""
    return _local_voting(partition, alpha, dropped, max_cond, pc_learn, CPDAG)


def fci_voting(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
               max_cond=AUTO) -> LearnResult:
    return _local_voting(partition, alpha, dropped, max_cond, fci_learn, PAG)


def pc_cit_voting(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
                  max_cond=AUTO) -> LearnResult:
    """PC driven by per-query votes of the clients' local tests."""
    oracle = cit_voting_oracle(partition, alpha, dropped)
    return pc_learn(oracle, oracle.d, max_cond, _names(partition))


def fci_cit_voting(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
                   max_cond=AUTO) -> LearnResult:
    oracle = cit_voting_oracle(partition, alpha, dropped)
    return fci_learn(oracle, oracle.d, max_cond, _names(partition))


def pc_centralized(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
                   max_cond=AUTO) -> LearnResult:
    """PC on the pooled data (all clients, dropout ignored)."""
    pooled = partition.pooled()
    return pc_learn(chi2_oracle(pooled, alpha), pooled.d, max_cond, pooled.names)


def fci_centralized(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
                    max_cond=AUTO) -> LearnResult:
    pooled = partition.pooled()
    return fci_learn(chi2_oracle(pooled, alpha), pooled.d, max_cond, pooled.names)
