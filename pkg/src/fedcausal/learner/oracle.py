"""CI oracles: a uniform ``(x, y, cond) -> independent?`` interface with a cache and a query log."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Union

from ..data import ClientPartition, DiscreteDataset
from ..fedci import EXACT_AGG, SKETCHED, CiDecision, CiQuery, centralized_chi2, fed_ci_test
from ..graph import CausalDag, Mag, d_separated, m_separated


class OracleError(RuntimeError):
    """A CI test failed; ``query`` is the offending query."""

    def __init__(self, query: CiQuery, cause: Exception):
        super().__init__(f"CI test {query} failed: {cause}")
        self.query = query


TestResult = Union[bool, CiDecision]


@dataclass
class QueryRecord:
    x: int
    y: int
    cond: tuple
    independent: bool
    statistic: float | None = None
    dof: int | None = None
    valid: bool = True
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "cond": list(self.cond), "independent": self.independent,
                "statistic": self.statistic, "dof": self.dof, "valid": self.valid, "degenerate": self.degenerate}


class CiOracle:
    """Wraps a test ``CiQuery -> bool | CiDecision`` (``True``/non-reject = independent).

    Queries are canonicalized (``x < y``, sorted ``cond``) before testing, so the
    oracle is symmetric by construction.  With ``cache`` on, repeated queries
    are answered from memory; the log holds one record per executed test.
    """

    def __init__(self, test: Callable[[CiQuery], TestResult], d: int, cache: bool = True, name: str = ""):
        self._test = test
        self.d = d
        self.name = name
        self.cache_enabled = cache
        self._cache: dict[CiQuery, bool] = {}
        self.log: list[QueryRecord] = []
        self.n_queries = 0

    def __call__(self, x: int, y: int, cond: Iterable[int] = ()) -> bool:
        q = CiQuery(int(x), int(y), tuple(cond)).canonical()
        q.check(self.d)
        self.n_queries += 1
        if self.cache_enabled and q in self._cache:
            return self._cache[q]
        try:
            out = self._test(q)
        except Exception as exc:  # noqa: BLE001 - re-raised with the query attached
            raise OracleError(q, exc) from exc
        if isinstance(out, CiDecision):
            rec = QueryRecord(q.x, q.y, q.cond, out.independent, out.statistic, out.dof, out.valid, out.degenerate)
        else:
            rec = QueryRecord(q.x, q.y, q.cond, bool(out))
        self.log.append(rec)
        if self.cache_enabled:
            self._cache[q] = rec.independent
        return rec.independent

    @property
    def n_tests(self) -> int:
        return len(self.log)

    def invalid_count(self) -> int:
        return sum(not r.valid for r in self.log)


def d_separation_oracle(g: CausalDag, cache: bool = True) -> CiOracle:
    return CiOracle(lambda q: d_separated(g, q.x, q.y, q.cond), g.d, cache, "d-separation")


def m_separation_oracle(m: Mag, cache: bool = True) -> CiOracle:
    return CiOracle(lambda q: m_separated(m, q.x, q.y, q.cond), m.d, cache, "m-separation")


def chi2_oracle(data: DiscreteDataset, alpha: float = 0.05, cache: bool = True) -> CiOracle:
    return CiOracle(lambda q: centralized_chi2(data, q, alpha), data.d, cache, "chi2")


def fed_oracle(partition: ClientPartition, alpha: float = 0.05, l: int = 50, mode: str = SKETCHED,
               seed: int = 0, dropped: Iterable[int] = (), cache: bool = True) -> CiOracle:
    """Federated chi-square oracle; each query runs its own aggregation rounds."""
    dropped = tuple(dropped)
    if mode not in (SKETCHED, EXACT_AGG):
        raise ValueError(f"unknown mode {mode!r}")

    def test(q):
        return fed_ci_test(partition, q, alpha=alpha, l=l, mode=mode, seed=seed, dropped=dropped)

    return CiOracle(test, len(partition.schema), cache, f"fed-{mode}")


def vote(decisions: Iterable[CiDecision]) -> bool:
    """Strict-majority vote for independence; degenerate tests abstain.

    With every client abstaining there is no evidence of dependence, so the
    vote returns independent.
    """
    ballots = [dec.independent for dec in decisions if not dec.degenerate]
    if not ballots:
        return True
    return sum(ballots) > len(ballots) / 2


def cit_voting_oracle(partition: ClientPartition, alpha: float = 0.05, dropped: Iterable[int] = (),
                      cache: bool = True) -> CiOracle:
    """Per-query majority vote of each client's local chi-square decision."""
    voters = [c for i, c in enumerate(partition.clients) if i not in set(dropped)]

    def test(q):
        return vote(centralized_chi2(c, q, alpha) for c in voters)

    return CiOracle(test, len(partition.schema), cache, "cit-voting")
