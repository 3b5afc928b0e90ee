"""In-process simulation of pairwise-masked secure aggregation.

Every unordered client pair ``(i, j)`` shares a 128-bit seed.  The mask for the
pair is the first ``m`` words of a Philox-4x64 counter-mode stream keyed by
that seed (``numpy.random.Philox(key=...).random_raw``), which is specified
bit-exactly and therefore reproducible across platforms.  Client ``i`` adds the
masks of pairs with higher-ranked partners and subtracts those with
lower-ranked partners, all modulo 2**64, so the masks cancel in the sum.

When clients drop out before submitting, survivors disclose the seeds they
shared with the dropped clients and the server strips the orphaned masks.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

RING_BITS = 64
DEFAULT_SCALE_BITS = 20


class ProtocolError(RuntimeError):
    """Misuse of the aggregation protocol (double submission, stall, ...)."""


def as_ring(values) -> np.ndarray:
    """Reinterpret integers as ring elements modulo 2**64 (two's complement for negatives)."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr.copy()
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError("ring vectors hold integers; encode reals with FixedPointCodec first")
    return arr.astype(np.int64).view(np.uint64)


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed point on the 2**64 ring: ``x -> round(x * 2**scale_bits)``."""

    scale_bits: int = DEFAULT_SCALE_BITS

    @property
    def scale(self) -> float:
        return float(2 ** self.scale_bits)

    @property
    def bound(self) -> float:
        """Largest magnitude whose encoding (and sums of similar size) stays unambiguous."""
        return 2.0 ** (RING_BITS - 1 - self.scale_bits) - 1

    def encode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot encode non-finite values")
        if np.any(np.abs(x) > self.bound):
            raise ValueError(f"value exceeds fixed-point bound {self.bound:g}")
        return np.rint(x * self.scale).astype(np.int64).view(np.uint64)

    def decode(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.uint64).view(np.int64).astype(float) / self.scale


def _pair_key(seed: int, round_id: str, a, b) -> int:
    h = hashlib.sha256(f"{seed}|{round_id}|{a}|{b}".encode()).digest()
    return int.from_bytes(h[:16], "little")


def prg_mask(key: int, m: int) -> np.ndarray:
    """``m`` uniform 64-bit words from the Philox stream keyed by ``key``."""
    return np.random.Philox(key=key).random_raw(m).astype(np.uint64)


@dataclass
class RoundTranscript:
    """Everything the server observes in one aggregation round."""

    round_id: str
    participants: list
    vector_len: int
    masked: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)
    revealed_pairs: list = field(default_factory=list)
    aggregate: list | None = None
    unprotected: bool = False
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "round_id": self.round_id,
            "label": self.label,
            "participants": [str(p) for p in self.participants],
            "vector_len": self.vector_len,
            "masked": {str(k): [int(x) for x in v] for k, v in self.masked.items()},
            "dropped": [str(p) for p in self.dropped],
            "revealed_pairs": [[str(a), str(b)] for a, b in self.revealed_pairs],
            "aggregate": None if self.aggregate is None else [int(x) for x in self.aggregate],
            "unprotected": self.unprotected,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class SecureAggRound:
    """One aggregation round; a small state machine guarded by a lock."""

    def __init__(self, participants: Sequence, vector_len: int, seed: int, round_id: str = "r0",
                 label: str = ""):
        participants = list(participants)
        if not participants:
            raise ValueError("a round needs participants")
        if len(set(participants)) != len(participants):
            raise ValueError("duplicate participant ids")
        if vector_len < 0:
            raise ValueError("vector length must be non-negative")
        self.participants = participants
        self.vector_len = int(vector_len)
        self.round_id = round_id
        self._rank = {p: r for r, p in enumerate(participants)}
        self._seed = seed
        self._lock = threading.Lock()
        self._messages: dict = {}
        self._dropped: set = set()
        self._done = False
        self.unprotected = len(participants) < 2
        if self.unprotected:
            logger.debug("secure aggregation round %s has a single participant; nothing is concealed", round_id)
        self.transcript = RoundTranscript(round_id, list(participants), self.vector_len,
                                          unprotected=self.unprotected, label=label)

    def _pair_seed(self, a, b) -> int:
        # only the two clients of a pair hold this seed
        lo, hi = sorted((a, b), key=self._rank.__getitem__)
        return _pair_key(self._seed, self.round_id, lo, hi)

    def _mask_for(self, client) -> np.ndarray:
        total = np.zeros(self.vector_len, dtype=np.uint64)
        r = self._rank[client]
        for other in self.participants:
            if other == client:
                continue
            mask = prg_mask(self._pair_seed(client, other), self.vector_len)
            if self._rank[other] > r:
                total += mask
            else:
                total -= mask
        return total

    def submit(self, client, payload) -> np.ndarray:
        """Mask ``payload`` on behalf of ``client`` and hand the masked vector to the server."""
        payload = as_ring(payload)
        with self._lock:
            if self._done:
                raise ProtocolError("round already aggregated")
            if client not in self._rank:
                raise ProtocolError(f"client {client!r} is not part of round {self.round_id}")
            if client in self._dropped:
                raise ProtocolError(f"client {client!r} was declared dropped")
            if client in self._messages:
                raise ProtocolError(f"client {client!r} already submitted")
            if payload.shape != (self.vector_len,):
                raise ProtocolError(f"payload length {payload.shape} != {self.vector_len}")
            message = payload + self._mask_for(client)
            self._messages[client] = message
            self.transcript.masked[client] = message.copy()
            return message

    def inject_dropout(self, clients: Iterable) -> None:
        clients = set(clients)
        with self._lock:
            if self._done:
                raise ProtocolError("dropout must be declared before aggregation")
            unknown = clients - set(self._rank)
            if unknown:
                raise ProtocolError(f"unknown clients {sorted(map(str, unknown))}")
            late = clients & set(self._messages)
            if late:
                raise ProtocolError(f"clients {sorted(map(str, late))} already submitted")
            if self._dropped | clients >= set(self.participants):
                raise ProtocolError("cannot drop every participant")
            self._dropped |= clients
            self.transcript.dropped = [p for p in self.participants if p in self._dropped]

    def aggregate(self) -> tuple[np.ndarray, RoundTranscript]:
        with self._lock:
            if self._done:
                raise ProtocolError("aggregate may be called once per round")
            survivors = [p for p in self.participants if p not in self._dropped]
            missing = [p for p in survivors if p not in self._messages]
            if missing:
                raise ProtocolError(f"round {self.round_id} stalled waiting for {missing}")
            total = np.zeros(self.vector_len, dtype=np.uint64)
            for p in survivors:
                total += self._messages[p]
            # mask repair: survivors disclose the pair seeds they share with dropped clients
            for s in survivors:
                rs = self._rank[s]
                for dead in self.participants:
                    if dead not in self._dropped:
                        continue
                    mask = prg_mask(self._pair_seed(s, dead), self.vector_len)
                    if self._rank[dead] > rs:
                        total -= mask
                    else:
                        total += mask
                    self.transcript.revealed_pairs.append((s, dead))
            self._done = True
            self.transcript.aggregate = total.copy()
            return total, self.transcript


def setup_round(participants: Sequence, vector_len: int, seed: int, round_id: str = "r0",
                label: str = "") -> SecureAggRound:
    return SecureAggRound(participants, vector_len, seed, round_id, label)


def secure_sum(payloads: Mapping, seed: int, dropped: Iterable = (), round_id: str = "r0",
               label: str = "", participants: Sequence | None = None) -> tuple[np.ndarray, RoundTranscript]:
    """Run a full round: set up, declare dropouts, collect survivors, aggregate.

    ``payloads`` maps surviving client ids to ring vectors; ``participants``
    defaults to its keys plus ``dropped``.
    """
    dropped = list(dropped)
    if participants is None:
        participants = list(payloads) + [p for p in dropped if p not in payloads]
    lengths = {len(np.asarray(v)) for v in payloads.values()}
    if len(lengths) != 1:
        raise ProtocolError("all payloads must share one length")
    rnd = setup_round(participants, lengths.pop(), seed, round_id, label)
    if dropped:
        rnd.inject_dropout(dropped)
    for cid in participants:
        if cid not in rnd._dropped:
            rnd.submit(cid, payloads[cid])
    return rnd.aggregate()


class Aggregator:
    """Server-side driver that runs successive rounds over a fixed client set.

    Clients in ``dropped`` are declared dropped in every round (wholesale
    dropout).  Transcripts are kept when ``keep_transcripts`` is set.
    """

    def __init__(self, clients: Sequence, seed: int, dropped: Iterable = (), keep_transcripts: bool = False,
                 prefix: str = "r"):
        self.clients = list(clients)
        self.dropped = [c for c in self.clients if c in set(dropped)]
        if len(self.dropped) == len(self.clients):
            raise ProtocolError("cannot drop every participant")
        self.survivors = [c for c in self.clients if c not in set(self.dropped)]
        self.seed = seed
        self.keep_transcripts = keep_transcripts
        self.transcripts: list[RoundTranscript] = []
        self.round_ids: list[str] = []
        self._prefix = prefix
        self._count = 0

    def sum(self, payloads: Mapping, label: str = "") -> np.ndarray:
        """Securely sum ``payloads`` (one ring vector per surviving client)."""
        round_id = f"{self._prefix}{self._count}"
        self._count += 1
        lengths = {len(payloads[c]) for c in self.survivors}
        if len(lengths) != 1:
            raise ProtocolError("all payloads must share one length")
        rnd = setup_round(self.clients, lengths.pop(), self.seed, round_id, label)
        if self.dropped:
            rnd.inject_dropout(self.dropped)
        for c in self.survivors:
            rnd.submit(c, payloads[c])
        total, transcript = rnd.aggregate()
        self.round_ids.append(round_id)
        if self.keep_transcripts:
            self.transcripts.append(transcript)
        return total
