"""Discrete datasets: synthesis, client partitioning and CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import CausalDag, VariableMeta


class DataFormatError(ValueError):
    """Malformed CSV input; the message names the offending row."""


class DiscreteDataset:
    """An ``n x d`` table of category indices with a per-column schema."""

    def __init__(self, schema: Sequence[VariableMeta], rows: np.ndarray):
        schema = tuple(schema)
        names = [v.name for v in schema]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        rows = np.asarray(rows)
        if rows.size == 0:
            rows = rows.reshape(0, len(schema))
        if rows.ndim != 2 or rows.shape[1] != len(schema):
            raise ValueError(f"rows must be an n x {len(schema)} table")
        rows = rows.astype(np.int64, copy=True)
        card = np.array([v.cardinality for v in schema], dtype=np.int64)
        if rows.size and (rows.min() < 0 or np.any(rows >= card)):
            raise ValueError("cell value outside its variable's cardinality")
        rows.setflags(write=False)
        self.schema = schema
        self.rows = rows

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.schema)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.schema)

    def select_rows(self, index) -> "DiscreteDataset":
        return DiscreteDataset(self.schema, self.rows[index])

    def select_columns(self, cols: Sequence[int]) -> "DiscreteDataset":
        cols = list(cols)
        return DiscreteDataset([self.schema[c] for c in cols], self.rows[:, cols])

    def __eq__(self, other):
        return (isinstance(other, DiscreteDataset) and self.schema == other.schema
                and np.array_equal(self.rows, other.rows))

    def __repr__(self):
        return f"DiscreteDataset(n={self.n}, d={self.d})"

    def metadata(self) -> dict:
        return {"n": self.n, "variables": [{"name": v.name, "cardinality": v.cardinality} for v in self.schema]}


@dataclass(frozen=True)
class ClientPartition:
    clients: tuple[DiscreteDataset, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.clients:
            raise ValueError("a partition needs at least one client")
        schema = self.clients[0].schema
        if any(c.schema != schema for c in self.clients):
            raise ValueError("all clients must share one schema")

    @property
    def k(self) -> int:
        return len(self.clients)

    @property
    def schema(self) -> tuple[VariableMeta, ...]:
        return self.clients[0].schema

    @property
    def sizes(self) -> list[int]:
        return [c.n for c in self.clients]

    def pooled(self) -> DiscreteDataset:
        return DiscreteDataset(self.schema, np.concatenate([c.rows for c in self.clients]))

    def without(self, dropped) -> "ClientPartition":
        dropped = set(dropped)
        keep = tuple(c for i, c in enumerate(self.clients) if i not in dropped)
        return ClientPartition(keep, {**self.metadata, "dropped": sorted(dropped)})

    def to_json(self) -> str:
        meta = {
            "k": self.k,
            "sizes": self.sizes,
            "variables": [{"name": v.name, "cardinality": v.cardinality} for v in self.schema],
            **self.metadata,
        }
        return json.dumps(meta, sort_keys=True)


@dataclass(frozen=True)
class Cpd:
    """Conditional probability table of ``variable`` given ``parents``.

    Row ``r`` of ``table`` is the distribution for the parent configuration
    whose mixed-radix index (first parent most significant) is ``r``.
    """

    variable: int
    parents: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError(f"CPT of variable {self.variable} must have non-negative rows summing to 1")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))


def make_schema(cardinalities: Sequence[int], names: Sequence[str] | None = None) -> tuple[VariableMeta, ...]:
    names = names or [f"X{i}" for i in range(len(cardinalities))]
    return tuple(VariableMeta(n, int(c)) for n, c in zip(names, cardinalities))


def _config_index(values: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of each row of ``values`` (first column most significant)."""
    idx = np.zeros(values.shape[0], dtype=np.int64)
    for col, c in enumerate(cards):
        idx = idx * c + values[:, col]
    return idx


def sample_cpds(g: CausalDag, schema: Sequence[VariableMeta], alpha: float = 1.0, seed: int = 0) -> list[Cpd]:
    """One symmetric-Dirichlet(``alpha``) CPT row per parent configuration."""
    if alpha <= 0:
        raise ValueError(f"Dirichlet concentration must be positive, got {alpha}")
    if len(schema) != g.d:
        raise ValueError("schema length must equal the number of graph nodes")
    rng = np.random.default_rng(seed)
    cpds = []
    for v in range(g.d):
        parents = tuple(g.parents(v))
        n_rows = math.prod(schema[p].cardinality for p in parents)
        table = rng.dirichlet(np.full(schema[v].cardinality, alpha), size=n_rows)
        cpds.append(Cpd(v, parents, table))
    return cpds


def forward_sample(g: CausalDag, cpds: Sequence[Cpd], n: int, seed: int = 0,
                   schema: Sequence[VariableMeta] | None = None) -> DiscreteDataset:
    """Draw ``n`` i.i.d. rows by ancestral sampling in topological order."""
    by_var = {c.variable: c for c in cpds}
    missing = set(range(g.d)) - set(by_var)
    if missing:
        raise ValueError(f"missing CPDs for variables {sorted(missing)}")
    if schema is None:
        schema = make_schema([by_var[v].table.shape[1] for v in range(g.d)], g.names)
    cards = [v.cardinality for v in schema]
    rng = np.random.default_rng(seed)
    out = np.zeros((n, g.d), dtype=np.int64)
    for v in g.topological_order:
        cpd = by_var[v]
        if set(cpd.parents) != set(g.parents(v)):
            raise ValueError(f"CPD parents of variable {v} disagree with the graph")
        rows = _config_index(out[:, list(cpd.parents)], [cards[p] for p in cpd.parents])
        cum = np.cumsum(cpd.table, axis=1)[rows]
        u = rng.random(n)
        out[:, v] = np.minimum((u[:, None] >= cum).sum(axis=1), cards[v] - 1)
    return DiscreteDataset(schema, out)


def partition_iid(data: DiscreteDataset, k: int, seed: int = 0) -> ClientPartition:
    """Shuffle and split into ``k`` near-equal clients (sizes differ by at most one)."""
    if k < 1:
        raise ValueError("need at least one client")
    if k > data.n:
        raise ValueError(f"cannot split {data.n} rows across {k} clients")
    perm = np.random.default_rng(seed).permutation(data.n)
    parts = np.array_split(perm, k)
    return ClientPartition(tuple(data.select_rows(p) for p in parts), {"scheme": "iid"})


@dataclass(frozen=True)
class HeterogeneitySpec:
    """Surrogate client variable ``C``, a child of ``parents``, that routes rows to clients.

    ``table`` has one row per joint configuration of ``parents`` and ``k`` columns.
    """

    parents: tuple[int, ...]
    k: int
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.shape[1] != self.k:
            raise ValueError("surrogate CPT must have one column per client")
        if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("surrogate CPT rows must be distributions")
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))

    @classmethod
    def homogeneous(cls, k: int) -> "HeterogeneitySpec":
        return cls((), k, np.full((1, k), 1.0 / k))

    @classmethod
    def sharp(cls, schema: Sequence[VariableMeta], parents: Sequence[int], k: int,
              sharpness: float = 8.0, seed: int = 0) -> "HeterogeneitySpec":
        """Softmax routing: each joint value of ``parents`` strongly prefers one client.

        Preferred clients cycle through ``0..k-1`` over a seeded shuffle of the
        joint values, so every client is preferred by some value when possible.
        """
        parents = tuple(parents)
        n_rows = math.prod(schema[p].cardinality for p in parents)
        rng = np.random.default_rng(seed)
        preferred = np.arange(n_rows)[rng.permutation(n_rows)] % k
        logits = np.zeros((n_rows, k))
        logits[np.arange(n_rows), preferred] = sharpness
        table = np.exp(logits - logits.max(axis=1, keepdims=True))
        return cls(parents, k, table / table.sum(axis=1, keepdims=True))


def partition_heterogeneous(g: CausalDag, cpds: Sequence[Cpd], spec: HeterogeneitySpec, n: int,
                            seed: int = 0, schema: Sequence[VariableMeta] | None = None) -> ClientPartition:
    """Sample from the graph augmented with the surrogate child ``C`` and route rows by ``C``.

    The observed columns are drawn exactly as ``forward_sample(g, cpds, n, seed)``
    would draw them, so the pooled data is an unbiased sample.  Empty clients
    are kept and listed in the metadata.
    """
    g.check_node(*spec.parents)
    data = forward_sample(g, cpds, n, seed, schema)
    cards = data.cardinalities
    rows = _config_index(data.rows[:, list(spec.parents)], [cards[p] for p in spec.parents])
    rng = np.random.default_rng([seed, 0xC1])
    cum = np.cumsum(spec.table, axis=1)[rows]
    label = np.minimum((rng.random(n)[:, None] >= cum).sum(axis=1), spec.k - 1)
    clients = tuple(data.select_rows(np.flatnonzero(label == i)) for i in range(spec.k))
    empty = [i for i, c in enumerate(clients) if c.n == 0]
    return ClientPartition(clients, {"scheme": "heterogeneous", "surrogate_parents": list(spec.parents),
                                     "empty_clients": empty})


def load_csv(path, schema: Sequence[VariableMeta] | None = None,
             categories: Sequence[Sequence[str]] | None = None) -> DiscreteDataset:
    """Read a header-first CSV of discrete tokens.

    By default each column's tokens are indexed in order of first appearance.
    With ``categories`` (one token list per column) tokens map to their list
    position.  With a ``schema`` and no ``categories`` the tokens must already
    be category indices below each variable's cardinality.  Unknown tokens are
    reported with their row number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty CSV file") from None
        d = len(header)
        if schema is not None:
            if [v.name for v in schema] != header:
                raise DataFormatError("CSV header does not match the supplied schema")
            if categories is None:
                categories = [[str(i) for i in range(v.cardinality)] for v in schema]
        if categories is not None and len(categories) != d:
            raise DataFormatError("need one category list per column")
        fixed = categories is not None
        maps = [{tok: i for i, tok in enumerate(c)} for c in categories] if fixed else [{} for _ in range(d)]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not t.strip() for t in rec):
                continue
            if len(rec) != d:
                raise DataFormatError(f"row {lineno}: expected {d} fields, got {len(rec)}")
            out = []
            for col, tok in enumerate(rec):
                tok = tok.strip()
                m = maps[col]
                if tok not in m:
                    if fixed:
                        raise DataFormatError(f"row {lineno}: unknown category {tok!r} in column {header[col]!r}")
                    m[tok] = len(m)
                out.append(m[tok])
            rows.append(out)
    if schema is None:
        # a column with one observed value still gets a binary domain
        schema = make_schema([max(2, len(m)) for m in maps], header)
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), d)
    return DiscreteDataset(schema, arr)


def write_csv(data: DiscreteDataset, path) -> None:
    """Write category indices under a name header.

    ``load_csv(path, schema=data.schema)`` reads the table back unchanged.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(data.names)
        w.writerows(data.rows.tolist())


def save_metadata(obj, path) -> None:
    meta = obj.metadata() if isinstance(obj, DiscreteDataset) else json.loads(obj.to_json())
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
