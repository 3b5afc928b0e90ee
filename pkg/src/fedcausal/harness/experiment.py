"""Experiment runner: synthesize or load data, partition, learn, score, summarize."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..data import (
    ClientPartition,
    DiscreteDataset,
    HeterogeneitySpec,
    forward_sample,
    load_csv,
    make_schema,
    partition_heterogeneous,
    partition_iid,
    sample_cpds,
)
from ..graph import (
    CausalDag,
    Mag,
    ShdReport,
    dag_to_cpdag,
    dag_to_mag,
    loads,
    mag_to_pag,
    random_er_dag,
    read_graph,
    shd,
)
from ..learner import (
    fci_centralized,
    fci_cit_voting,
    fci_voting,
    fedfci,
    fedpc,
    pc_centralized,
    pc_cit_voting,
    pc_voting,
)
from .config import PC_FAMILY, ConfigError, ExperimentConfig

FEDERATED = {"fedpc": fedpc, "fedfci": fedfci}
BASELINES = {
    "pc": pc_centralized,
    "pc-voting": pc_voting,
    "pc-cit-voting": pc_cit_voting,
    "fci": fci_centralized,
    "fci-voting": fci_voting,
    "fci-cit-voting": fci_cit_voting,
}

RESULT_FIELDS = ("algorithm", "d", "k", "seed", "shd", "missing", "extra", "mismatched",
                 "n_tests", "n_invalid", "dropped", "heterogeneous")
SUMMARY_FIELDS = ("algorithm", "d", "k", "runs", "shd_mean", "shd_std")


class ExperimentError(RuntimeError):
    """A grid cell failed; ``cell`` holds its coordinates."""

    def __init__(self, cell: dict, cause: Exception):
        super().__init__(f"cell {cell} failed: {cause}")
        self.cell = cell


@dataclass
class RunResult:
    algorithm: str
    d: int
    k: int
    seed: int
    report: ShdReport
    duration: float
    n_tests: int = 0
    n_invalid: int = 0
    dropped: list = field(default_factory=list)
    heterogeneous: bool = False

    def row(self) -> dict:
        """Deterministic fields only; durations are reported separately."""
        return {"algorithm": self.algorithm, "d": self.d, "k": self.k, "seed": self.seed,
                **self.report.to_dict(), "n_tests": self.n_tests, "n_invalid": self.n_invalid,
                "dropped": list(self.dropped), "heterogeneous": self.heterogeneous}


@dataclass
class ExperimentResult:
    runs: list
    config: dict

    def summary(self) -> list[dict]:
        """Mean and population standard deviation of SHD per (algorithm, d, K) cell."""
        cells: dict = {}
        for r in self.runs:
            cells.setdefault((r.algorithm, r.d, r.k), []).append(r.report.shd)
        out = []
        for (alg, d, k), vals in cells.items():
            out.append({"algorithm": alg, "d": d, "k": k, "runs": len(vals),
                        "shd_mean": float(np.mean(vals)), "shd_std": float(np.std(vals))})
        return out

    def mean_shd(self, algorithm: str, d: int | None = None, k: int | None = None) -> float:
        vals = [r.report.shd for r in self.runs if r.algorithm == algorithm
                and (d is None or r.d == d) and (k is None or r.k == k)]
        if not vals:
            raise KeyError(f"no runs for {algorithm}")
        return float(np.mean(vals))


# --------------------------------------------------------------------------
# data for one grid cell
# --------------------------------------------------------------------------


@dataclass
class Instance:
    """A partition plus the generating graph (DAG or MAG) and its latent nodes."""

    partition: ClientPartition
    graph: object
    latent: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)

    def truth(self, algorithm: str):
        """Equivalence class the algorithm is scored against: CPDAG for PC, PAG for FCI."""
        kind = "cpdag" if algorithm in PC_FAMILY else "pag"
        if kind not in self._cache:
            g = self.graph
            if kind == "cpdag":
                if isinstance(g, Mag) or self.latent:
                    raise ConfigError("PC-family algorithms need a causally sufficient ground truth")
                self._cache[kind] = dag_to_cpdag(g)
            else:
                mag = g if isinstance(g, Mag) else dag_to_mag(g, self.latent)
                self._cache[kind] = mag_to_pag(mag)
        return self._cache[kind]


def sachs_truth() -> CausalDag:
    text = resources.files("fedcausal").joinpath("assets/sachs_consensus.graph").read_text(encoding="utf-8")
    return loads(text)


def _load_truth(spec: str):
    return sachs_truth() if spec == "sachs" else read_graph(spec)


def _hetero_parents(g: CausalDag, observed, cfg) -> list[int]:
    if cfg.heterogeneity.parents is not None:
        return [int(p) for p in cfg.heterogeneity.parents]
    degree = g.skeleton().sum(axis=0)
    # two highest-degree observed variables, ties broken by index
    return sorted(sorted(observed, key=lambda v: (-degree[v], v))[:2])


def synthesize(cfg: ExperimentConfig, d: int, k: int, seed: int) -> Instance:
    """Ground truth and partition for a synthetic cell; identical for every algorithm."""
    total = d + cfg.latents
    g = random_er_dag(total, cfg.edge_prob, seed)
    schema = make_schema([cfg.cardinality] * total)
    cpds = sample_cpds(g, schema, cfg.dirichlet_alpha, seed)
    rng = np.random.default_rng([seed, 0x1A7])
    latent = sorted(rng.choice(total, cfg.latents, replace=False).tolist()) if cfg.latents else []
    observed = [v for v in range(total) if v not in latent]
    if cfg.heterogeneity is not None and k > 1:
        spec = HeterogeneitySpec.sharp(schema, _hetero_parents(g, observed, cfg), k,
                                       cfg.heterogeneity.sharpness, seed)
        part = partition_heterogeneous(g, cpds, spec, cfg.n, seed, schema)
    else:
        part = partition_iid(forward_sample(g, cpds, cfg.n, seed, schema), k, seed)
    if latent:
        part = ClientPartition(tuple(c.select_columns(observed) for c in part.clients), part.metadata)
    return Instance(part, g, latent)


def load_instance(cfg: ExperimentConfig, k: int, seed: int) -> Instance:
    truth = _load_truth(cfg.truth)
    data = load_csv(cfg.dataset)
    # column names match the graph's node names, ignoring case
    index = {n.lower(): i for i, n in enumerate(data.names)}
    missing = [n for n in truth.names if n.lower() not in index]
    if missing:
        raise ConfigError(f"dataset lacks ground-truth variables {missing}")
    data = data.select_columns([index[n.lower()] for n in truth.names])
    data = DiscreteDataset(tuple(replace(v, name=n) for v, n in zip(data.schema, truth.names)), data.rows)
    return Instance(partition_iid(data, k, seed), truth)


def dropped_clients(k: int, fraction: float, seed: int) -> list[int]:
    """``ceil(fraction * K)`` clients, drawn once per run and dropped for all of it."""
    count = math.ceil(fraction * k - 1e-12)
    if count == 0:
        return []
    if count >= k:
        raise ConfigError(f"dropout {fraction} would remove all {k} clients")
    rng = np.random.default_rng([seed, k, 0xD0])
    return sorted(rng.choice(k, count, replace=False).tolist())


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


def run_algorithm(name: str, inst: Instance, cfg: ExperimentConfig, seed: int, dropped=()):
    if name in FEDERATED:
        return FEDERATED[name](inst.partition, cfg.alpha, cfg.l, cfg.mode, seed, dropped, cfg.max_cond)
    if name in ("pc", "fci"):
        # the centralized reference sees every client's data
        return BASELINES[name](inst.partition, cfg.alpha, (), cfg.max_cond)
    return BASELINES[name](inst.partition, cfg.alpha, dropped, cfg.max_cond)


def _run_cell(args) -> list[RunResult]:
    cfg, d, k, seed = args
    cell = {"d": d, "k": k, "seed": seed}
    try:
        inst = load_instance(cfg, k, seed) if cfg.dataset else synthesize(cfg, d, k, seed)
        dropped = dropped_clients(k, cfg.dropout, seed)
        out = []
        for alg in cfg.algorithms:
            truth = inst.truth(alg)
            start = time.perf_counter()
            res = run_algorithm(alg, inst, cfg, seed, dropped)
            duration = time.perf_counter() - start
            out.append(RunResult(alg, d, k, seed, shd(res.pattern, truth), duration, res.n_tests, res.n_invalid,
                                 dropped if alg not in ("pc", "fci") else [], cfg.heterogeneity is not None))
        return out
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the cell attached
        raise ExperimentError(cell, exc) from exc


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (d, K, seed) cell and every algorithm in it.

    With a dataset, ``d`` is the dataset's width.  Cells run in parallel
    processes when ``cfg.workers > 1``; the output order never depends on it.
    """
    cfg.validate()
    if cfg.dataset:
        dims = [len(_load_truth(cfg.truth).names)]
    else:
        dims = cfg.d
    cells = [(cfg, d, k, s) for d in dims for k in cfg.k for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    return ExperimentResult([r for chunk in chunks for r in chunk], cfg.to_dict())


def dropout_experiment(cfg: ExperimentConfig, fraction: float) -> dict:
    """Run the grid with and without dropout and report the SHD gap per cell."""
    base = run_experiment(replace(cfg, dropout=0.0))
    dropped = run_experiment(replace(cfg, dropout=fraction))
    ref = {(r["algorithm"], r["d"], r["k"]): r["shd_mean"] for r in base.summary()}
    delta = [{**row, "shd_increase": row["shd_mean"] - ref[(row["algorithm"], row["d"], row["k"])]}
             for row in dropped.summary()]
    return {"baseline": base, "dropout": dropped, "delta": delta}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: (" ".join(map(str, row[c])) if isinstance(row[c], list) else row[c]) for c in columns})
    return buf.getvalue()


def emit_results(result: ExperimentResult, outdir, fmt: str = "json") -> dict:
    """Write ``results``, ``summary`` (both deterministic) and ``timings`` files.

    ``results`` has one row per run with the fields in ``RESULT_FIELDS``;
    ``summary`` one row per cell with ``SUMMARY_FIELDS``.  Wall-clock
    durations live in ``timings.json`` so the other two are a pure function of
    the config.
    """
    if fmt not in ("json", "csv"):
        raise ConfigError(f"unknown format {fmt!r}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [r.row() for r in result.runs]
    summary = result.summary()
    paths = {"results": outdir / f"results.{fmt}", "summary": outdir / f"summary.{fmt}",
             "timings": outdir / "timings.json"}
    if fmt == "json":
        paths["results"].write_text(json.dumps({"config": result.config, "runs": rows}, indent=2, sort_keys=True) + "\n")
        paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        paths["results"].write_text(_csv_text(rows, RESULT_FIELDS))
        paths["summary"].write_text(_csv_text(summary, SUMMARY_FIELDS))
    timings = [{"algorithm": r.algorithm, "d": r.d, "k": r.k, "seed": r.seed, "seconds": r.duration}
               for r in result.runs]
    paths["timings"].write_text(json.dumps(timings, indent=2) + "\n")
    return paths
