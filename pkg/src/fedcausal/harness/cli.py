"""Command line entry point: ``fedcausal {synth,learn,ci-test,experiment,score}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..data import (
    DataFormatError,
    forward_sample,
    load_csv,
    make_schema,
    partition_iid,
    sample_cpds,
    save_metadata,
    write_csv,
)
from ..fedci import MODES, SKETCHED, CiQuery, centralized_chi2, fed_ci_test
from ..graph import (
    CPDAG,
    CausalDag,
    GraphError,
    Mag,
    dag_to_cpdag,
    dag_to_mag,
    mag_to_pag,
    random_er_dag,
    read_graph,
    shd,
    write_graph,
)
from .config import ALGORITHM_IDS, ConfigError, load_config
from .experiment import (
    BASELINES,
    FEDERATED,
    dropped_clients,
    emit_results,
    run_experiment,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("fedcausal")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--encoding-size", type=int, default=50, dest="l")
    p.add_argument("--mode", choices=MODES, default=SKETCHED)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedcausal", description="Federated causal discovery on discrete data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a random DAG and data from it")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--edge-prob", type=float, default=None)
    p.add_argument("--cardinality", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV; the graph goes next to it as <stem>.graph")

    p = sub.add_parser("learn", help="learn a pattern from a CSV split across K simulated clients")
    p.add_argument("--data", required=True)
    p.add_argument("--algorithm", choices=ALGORITHM_IDS, default="fedpc")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--out", help="write the learned pattern here (graph format)")
    p.add_argument("--manifest", help="write the run manifest (JSON) here")
    _common(p)

    p = sub.add_parser("ci-test", help="one conditional-independence test")
    p.add_argument("--data", required=True)
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--given", nargs="*", default=[])
    p.add_argument("--k", type=int, default=1, help="clients; 1 with --centralized runs the pooled test")
    p.add_argument("--centralized", action="store_true")
    _common(p)

    p = sub.add_parser("experiment", help="run an experiment grid from a JSON/TOML config")
    p.add_argument("config")
    p.add_argument("--out", default="results")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--full-grid", action="store_true", help="use the large grid (d up to 100, K up to 64)")

    p = sub.add_parser("score", help="SHD of a learned pattern against a ground truth")
    p.add_argument("learned")
    p.add_argument("truth", help="DAG, MAG, CPDAG or PAG file")
    return parser


def _column(data, token: str) -> int:
    if token in data.names:
        return data.names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise ConfigError(f"unknown variable {token!r}") from None
    if not 0 <= idx < data.d:
        raise ConfigError(f"variable index {idx} out of range")
    return idx


def cmd_synth(args) -> int:
    g = random_er_dag(args.d, args.edge_prob, args.seed)
    schema = make_schema([args.cardinality] * args.d)
    data = forward_sample(g, sample_cpds(g, schema, 1.0, args.seed), args.n, args.seed, schema)
    out = Path(args.out)
    write_csv(data, out)
    write_graph(g, out.with_suffix(".graph"))
    save_metadata(data, out.with_suffix(".meta.json"))
    print(json.dumps({"data": str(out), "graph": str(out.with_suffix(".graph")), "edges": g.n_edges()}))
    return EXIT_OK


def cmd_learn(args) -> int:
    data = load_csv(args.data)
    part = partition_iid(data, args.k, args.seed)
    dropped = dropped_clients(args.k, args.dropout, args.seed)
    if args.algorithm in FEDERATED:
        res = FEDERATED[args.algorithm](part, args.alpha, args.l, args.mode, args.seed, dropped)
    else:
        res = BASELINES[args.algorithm](part, args.alpha, dropped)
    if args.out:
        write_graph(res.pattern, args.out)
    else:
        sys.stdout.write(repr(res.pattern) + "\n")
    if args.manifest:
        doc = {"algorithm": args.algorithm, "k": args.k, "seed": args.seed, "alpha": args.alpha, "l": args.l,
               "mode": args.mode, "dropped": dropped, **res.manifest()}
        Path(args.manifest).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_ci_test(args) -> int:
    data = load_csv(args.data)
    q = CiQuery(_column(data, args.x), _column(data, args.y), tuple(_column(data, z) for z in args.given))
    if args.centralized:
        dec = centralized_chi2(data, q, args.alpha)
    else:
        dec = fed_ci_test(partition_iid(data, args.k, args.seed), q, args.alpha, args.l, args.mode, args.seed)
    print(dec.to_json())
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.full_grid:
        cfg = cfg.with_full_grid()
    result = run_experiment(cfg)
    paths = emit_results(result, args.out, args.format)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def _as_truth(g, kind: str):
    if isinstance(g, CausalDag):
        return dag_to_cpdag(g) if kind == CPDAG else mag_to_pag(dag_to_mag(g))
    if isinstance(g, Mag):
        return mag_to_pag(g)
    return g


def cmd_score(args) -> int:
    learned = read_graph(args.learned)
    if isinstance(learned, (CausalDag, Mag)):
        raise ConfigError("the learned graph must be a CPDAG or PAG")
    report = shd(learned, _as_truth(read_graph(args.truth), learned.kind))
    print(json.dumps(report.to_dict()))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "learn": cmd_learn, "ci-test": cmd_ci_test, "experiment": cmd_experiment,
            "score": cmd_score}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataFormatError, GraphError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
