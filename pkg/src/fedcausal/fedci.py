"""Conditional-independence testing for discrete data: pooled chi-square and its
federated counterpart built on secure aggregation and stable random projections.

The chi-square statistic ``Q = sum_z sum_{x,y} (v_xyz - vbar_xyz)^2 / vbar_xyz``
(``vbar_xyz = v_xz v_yz / v_z``) equals ``sum_z ||u_z||^2`` where
``u_z = sum_i u^i_z`` and each client holds
``u^i_z[x, y] = (v^i_xyz - vbar_xyz / K) / sqrt(vbar_xyz)``.  The federated test
releases only the slice margins and a random projection of ``u_z``; the server
recovers ``||u_z||^2`` with the geometric-mean estimator.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi2

from .data import ClientPartition, DiscreteDataset
from .secureagg import Aggregator, FixedPointCodec, as_ring

SKETCHED = "sketched"
EXACT_AGG = "exact-agg"
MODES = (SKETCHED, EXACT_AGG)
MIN_EXPECTED_COUNT = 5.0
MAX_SLICES = 1 << 20


@dataclass(frozen=True)
class CiQuery:
    x: int
    y: int
    cond: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cond", tuple(int(c) for c in self.cond))
        if self.x == self.y:
            raise ValueError("a CI query needs two distinct variables")
        if self.x in self.cond or self.y in self.cond:
            raise ValueError("tested variables may not appear in the conditioning set")
        if len(set(self.cond)) != len(self.cond):
            raise ValueError("conditioning set has duplicates")

    def canonical(self) -> "CiQuery":
        return CiQuery(min(self.x, self.y), max(self.x, self.y), tuple(sorted(self.cond)))

    def check(self, d: int) -> None:
        for v in (self.x, self.y, *self.cond):
            if not 0 <= v < d:
                raise ValueError(f"variable index {v} out of range for {d} variables")


@dataclass
class ContingencySlice:
    z: tuple[int, ...]
    v_z: int
    v_xz: np.ndarray
    v_yz: np.ndarray
    v_xyz: np.ndarray


@dataclass
class CiDecision:
    statistic: float
    dof: int
    alpha: float
    reject: bool
    threshold: float
    per_z: list = field(default_factory=list)
    degenerate: bool = False
    valid: bool = True
    mode: str = "centralized"
    transcript_ids: list = field(default_factory=list)

    @property
    def independent(self) -> bool:
        return not self.reject

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_z"] = [{"z": list(z), "statistic": float(q), "dof": int(k)} for z, q, k in self.per_z]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def decide(statistic: float, dof: int, alpha: float) -> tuple[bool, float]:
    """Reject iff ``statistic`` exceeds the ``1 - alpha`` chi-square quantile; never with zero dof."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if dof <= 0:
        return False, math.inf
    threshold = float(chi2.ppf(1.0 - alpha, dof))
    return bool(statistic > threshold), threshold


# --------------------------------------------------------------------------
# counting
# --------------------------------------------------------------------------


def _slice_shape(cards: Sequence[int], q: CiQuery) -> tuple[int, int, int]:
    nz = math.prod(cards[c] for c in q.cond)
    if nz > MAX_SLICES:
        raise ValueError(f"conditioning set has {nz} joint values (limit {MAX_SLICES})")
    return nz, cards[q.x], cards[q.y]


def _z_index(rows: np.ndarray, cards: Sequence[int], cond: Sequence[int]) -> np.ndarray:
    idx = np.zeros(rows.shape[0], dtype=np.int64)
    for c in cond:
        idx = idx * cards[c] + rows[:, c]
    return idx


def _z_values(index: int, cards: Sequence[int], cond: Sequence[int]) -> tuple[int, ...]:
    out = []
    for c in reversed(cond):
        index, r = divmod(index, cards[c])
        out.append(r)
    return tuple(reversed(out))


def joint_table(data: DiscreteDataset, q: CiQuery) -> np.ndarray:
    """Counts ``v_xyz`` as an ``(n_z, |X|, |Y|)`` array; an empty ``cond`` gives one slice."""
    q.check(data.d)
    cards = data.cardinalities
    nz, cx, cy = _slice_shape(cards, q)
    rows = data.rows
    flat = (_z_index(rows, cards, q.cond) * cx + rows[:, q.x]) * cy + rows[:, q.y]
    return np.bincount(flat, minlength=nz * cx * cy).reshape(nz, cx, cy)


def local_counts(data: DiscreteDataset, q: CiQuery, z: Sequence[int] = ()) -> ContingencySlice:
    """Exact counts of one slice ``Z = z`` of a client's data."""
    q.check(data.d)
    z = tuple(int(v) for v in z)
    if len(z) != len(q.cond):
        raise ValueError("z-assignment must give one value per conditioning variable")
    rows = data.rows
    mask = np.ones(rows.shape[0], dtype=bool)
    for c, val in zip(q.cond, z):
        mask &= rows[:, c] == val
    cx, cy = data.cardinalities[q.x], data.cardinalities[q.y]
    sub = rows[mask]
    v_xyz = np.bincount(sub[:, q.x] * cy + sub[:, q.y], minlength=cx * cy).reshape(cx, cy)
    return ContingencySlice(z, int(mask.sum()), v_xyz.sum(axis=1), v_xyz.sum(axis=0), v_xyz)


# --------------------------------------------------------------------------
# pooled test
# --------------------------------------------------------------------------


def _slice_stats(v_xz: np.ndarray, v_yz: np.ndarray):
    """Expected counts and dof of one slice from its margins."""
    v_z = v_xz.sum()
    vbar = np.outer(v_xz, v_yz) / v_z
    dof = (int(np.count_nonzero(v_xz)) - 1) * (int(np.count_nonzero(v_yz)) - 1)
    return vbar, vbar > 0, dof


def _finish(per_z, alpha, min_expected, mode, transcript_ids=()) -> CiDecision:
    stat = float(sum(q for _, q, _ in per_z))
    dof = int(sum(k for _, _, k in per_z))
    reject, threshold = decide(stat, dof, alpha)
    return CiDecision(stat, dof, alpha, reject, threshold, per_z, degenerate=dof == 0,
                      valid=min_expected >= MIN_EXPECTED_COUNT, mode=mode, transcript_ids=list(transcript_ids))


def centralized_chi2(data: DiscreteDataset, q: CiQuery, alpha: float = 0.05) -> CiDecision:
    """Pearson chi-square test of ``X indep Y | Z`` on one dataset."""
    decide(0.0, 0, alpha)
    q = q.canonical()
    table = joint_table(data, q)
    cards = data.cardinalities
    per_z = []
    min_expected = math.inf
    for zi in np.flatnonzero(table.sum(axis=(1, 2))):
        t = table[zi]
        vbar, keep, dof = _slice_stats(t.sum(axis=1), t.sum(axis=0))
        stat = float((((t - vbar) ** 2)[keep] / vbar[keep]).sum())
        min_expected = min(min_expected, float(vbar[keep].min()))
        per_z.append((_z_values(int(zi), cards, q.cond), stat, dof))
    return _finish(per_z, alpha, min_expected, "centralized")


# --------------------------------------------------------------------------
# projection sketch
# --------------------------------------------------------------------------


def make_projection(m: int, l: int, seed) -> np.ndarray:
    """``l x m`` matrix of i.i.d. symmetric 2-stable draws with unit scale.

    The unit-scale symmetric 2-stable law has characteristic function
    ``exp(-t^2)``, i.e. it is ``N(0, 2)``; this is the scale the geometric-mean
    normalizer below assumes.
    """
    if l <= 1:
        raise ValueError("encoding size must be at least 2")
    rng = np.random.default_rng(seed)
    return math.sqrt(2.0) * rng.standard_normal((l, m))


def encode(u: np.ndarray, projection: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if projection.shape[1] != u.shape[0]:
        raise ValueError(f"projection expects length {projection.shape[1]}, got {u.shape[0]}")
    return projection @ u


def _log_gm_normalizer(l: int) -> float:
    # log of ((2/pi) Gamma(2/l) Gamma(1 - 1/l) sin(pi/l))^l
    return l * (math.log(2.0 / math.pi) + gammaln(2.0 / l) + gammaln(1.0 - 1.0 / l) + math.log(math.sin(math.pi / l)))


def gm_estimate(e: np.ndarray, l: int | None = None, form: str = "product") -> float:
    """Geometric-mean estimate of ``||u||^2`` from the projection ``e = P u``.

    ``form="product"`` is the unbiased estimator ``prod_k |e_k|^(2/l) / norm``
    (evaluated in log space).  ``form="sum"`` replaces the product with a sum
    and is kept only for comparison; it is not an estimator of ``||u||^2``.
    """
    e = np.asarray(e, dtype=float)
    l = len(e) if l is None else l
    if len(e) != l:
        raise ValueError("encoding length does not match l")
    if l <= 1:
        raise ValueError("encoding size must be at least 2")
    if form == "sum":
        return float(np.sum(np.abs(e) ** (2.0 / l)) / math.exp(_log_gm_normalizer(l)))
    if form != "product":
        raise ValueError(f"unknown estimator form {form!r}")
    if np.any(e == 0):
        return 0.0
    return float(math.exp(2.0 * np.mean(np.log(np.abs(e))) - _log_gm_normalizer(l)))


def _slice_seed(seed: int, q: CiQuery, zi: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, q.x, q.y, len(q.cond), *q.cond, zi])


def _round_seed(seed: int, q: CiQuery) -> int:
    return int(np.random.SeedSequence([seed, 0xA66, q.x, q.y, len(q.cond), *q.cond]).generate_state(1)[0])


# --------------------------------------------------------------------------
# federated test
# --------------------------------------------------------------------------


def fed_ci_test(partition: ClientPartition, q: CiQuery, alpha: float = 0.05, l: int = 50,
                mode: str = SKETCHED, seed: int = 0, dropped: Iterable[int] = (),
                aggregator: Aggregator | None = None, scale_bits: int = 20) -> CiDecision:
    """Federated chi-square test of ``X indep Y | Z`` over the clients of ``partition``.

    Three secure-aggregation rounds: the ``v_z`` histogram (which reveals the
    non-empty slices), the slice margins ``v_xz``/``v_yz``, and finally the
    per-slice encodings ``P_z u^i_z`` (``mode="sketched"``) or the raw
    ``u^i_z`` (``mode="exact-agg"``, a validation path that still reveals only
    sums).  Clients in ``dropped`` take no part in any round.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    decide(0.0, 0, alpha)
    if mode == SKETCHED and l <= 1:
        raise ValueError("encoding size must be at least 2")
    q = q.canonical()
    cards = tuple(v.cardinality for v in partition.schema)
    q.check(len(cards))
    clients = list(range(partition.k))
    if aggregator is None:
        aggregator = Aggregator(clients, _round_seed(seed, q), dropped)
    survivors = aggregator.survivors
    first_round = len(aggregator.round_ids)
    codec = FixedPointCodec(scale_bits)
    nz, cx, cy = _slice_shape(cards, q)

    # client side, never leaves the client
    local = {i: joint_table(partition.clients[i], q) for i in survivors}

    # i) v_z histogram, then margins of the non-empty slices
    v_z = aggregator.sum({i: as_ring(local[i].sum(axis=(1, 2))) for i in survivors}, "v_z").view(np.int64)
    slices = np.flatnonzero(v_z > 0)
    margins = aggregator.sum(
        {i: as_ring(np.concatenate([local[i][slices].sum(axis=2).ravel(), local[i][slices].sum(axis=1).ravel()]))
         for i in survivors}, "margins").view(np.int64)
    ns = len(slices)
    v_xz = margins[: ns * cx].reshape(ns, cx)
    v_yz = margins[ns * cx:].reshape(ns, cy)

    # broadcast vbar and P; clients form u^i_z and (optionally) encode it
    k_eff = len(survivors)
    stats = [_slice_stats(v_xz[s], v_yz[s]) for s in range(ns)]
    projections = [make_projection(cx * cy, l, _slice_seed(seed, q, int(slices[s]))) if mode == SKETCHED else None
                   for s in range(ns)]
    payloads = {}
    for i in survivors:
        parts = []
        for s in range(ns):
            vbar, keep, _ = stats[s]
            u = np.zeros(cx * cy)
            u[keep.ravel()] = ((local[i][slices[s]] - vbar / k_eff)[keep] / np.sqrt(vbar[keep]))
            parts.append(encode(u, projections[s]) if mode == SKETCHED else u)
        payloads[i] = codec.encode(np.concatenate(parts) if parts else np.zeros(0))
    total = codec.decode(aggregator.sum(payloads, "encodings" if mode == SKETCHED else "residuals"))

    # server side
    width = l if mode == SKETCHED else cx * cy
    per_z = []
    min_expected = math.inf
    for s in range(ns):
        vbar, keep, dof = stats[s]
        chunk = total[s * width:(s + 1) * width]
        stat = gm_estimate(chunk, l) if mode == SKETCHED else float(chunk @ chunk)
        min_expected = min(min_expected, float(vbar[keep].min()))
        per_z.append((_z_values(int(slices[s]), cards, q.cond), stat, dof))
    return _finish(per_z, alpha, min_expected, mode, aggregator.round_ids[first_round:])
