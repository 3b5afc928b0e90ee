"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -m acceptance``; the lines are
repeated under "acceptance criteria" in the terminal summary.  Criterion 8
needs the discretized 853 x 11 Sachs table; point ``SACHS_CSV`` at it.
"""

import json
import os
import time

import numpy as np
import pytest

from fedcausal.data import forward_sample, make_schema, partition_iid, sample_cpds
from fedcausal.fedci import CiQuery, centralized_chi2, encode, fed_ci_test, gm_estimate, make_projection
from fedcausal.graph import dag_to_cpdag, dag_to_mag, mag_to_pag, random_er_dag, shd
from fedcausal.harness import ExperimentConfig, dropout_experiment, run_experiment
from fedcausal.harness.experiment import load_instance, sachs_truth
from fedcausal.learner import d_separation_oracle, fci_learn, fedpc, m_separation_oracle, pc_centralized, pc_learn
from fedcausal.secureagg import FixedPointCodec, setup_round

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def _dataset(d, n, seed, card_range=(2, 4)):
    rng = np.random.default_rng(seed)
    schema = make_schema(rng.integers(card_range[0], card_range[1], size=d))
    g = random_er_dag(d, None, seed)
    return g, forward_sample(g, sample_cpds(g, schema, 1.0, seed), n, seed, schema)


def _random_query(rng, d, max_cond=2):
    perm = rng.permutation(d)
    size = int(rng.integers(0, max_cond + 1))
    return CiQuery(int(perm[0]), int(perm[1]), tuple(int(v) for v in perm[2:2 + size]))


def test_criterion_1_oracle_soundness(verdict):
    start = time.perf_counter()
    pc_bad = 0
    for seed in range(100):
        d = int(np.random.default_rng(seed).integers(2, 11))
        g = random_er_dag(d, None, seed)
        pc_bad += pc_learn(d_separation_oracle(g), d).pattern != dag_to_cpdag(g)
    fci_bad = 0
    for seed in range(50):
        rng = np.random.default_rng(10_000 + seed)
        n_latent = int(rng.integers(1, 3))
        g = random_er_dag(8 + n_latent, 0.3, 10_000 + seed)
        m = dag_to_mag(g, rng.choice(g.d, n_latent, replace=False))
        fci_bad += fci_learn(m_separation_oracle(m), m.d, names=m.names).pattern != mag_to_pag(m)
    elapsed = time.perf_counter() - start
    ok = pc_bad == 0 and fci_bad == 0 and elapsed < 120
    verdict(1, ok, f"PC mismatches {pc_bad}/100, FCI mismatches {fci_bad}/50, {elapsed:.1f}s")
    assert ok


def test_criterion_2_exact_agg_equals_centralized(verdict):
    start = time.perf_counter()
    worst, flips = 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(4, 8))
        _, ds = _dataset(d, int(rng.integers(500, 5000)), seed)
        part = partition_iid(ds, int(rng.integers(1, 11)), seed)
        q = _random_query(rng, d)
        a = centralized_chi2(ds, q)
        b = fed_ci_test(part, q, mode="exact-agg", seed=seed)
        worst = max(worst, abs(a.statistic - b.statistic))
        flips += (a.reject != b.reject) or (a.dof != b.dof)
    graph_diff = 0
    for seed in range(20):
        _, ds = _dataset(10, 3000, 100 + seed, (2, 3))
        part = partition_iid(ds, 2 + seed % 9, seed)
        graph_diff += fedpc(part, mode="exact-agg", seed=seed).pattern != pc_centralized(part).pattern
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and flips == 0 and graph_diff == 0 and elapsed < 300
    verdict(2, ok, f"max |dQ| {worst:.2e}, decision flips {flips}/50, pattern differences {graph_diff}/20, "
                   f"{elapsed:.1f}s")
    assert ok


def test_criterion_3_sketch_fidelity(verdict):
    start = time.perf_counter()
    u = np.array([3.0, 4.0, 0.0, 0.0, 0.0, 0.0])  # ||u||^2 = 25
    rng = np.random.default_rng(2024)
    est = [gm_estimate(encode(u, make_projection(len(u), 50, rng.integers(2**63))), 50) for _ in range(2000)]
    rel = abs(np.mean(est) - 25.0) / 25.0
    agree = 0
    for seed in range(200):
        qrng = np.random.default_rng(50_000 + seed)
        d = int(qrng.integers(4, 8))
        _, ds = _dataset(d, 5000, 50_000 + seed)
        q = _random_query(qrng, d)
        agree += centralized_chi2(ds, q).reject == fed_ci_test(partition_iid(ds, 10, seed), q, seed=seed).reject
    elapsed = time.perf_counter() - start
    ok = rel < 0.05 and agree >= 190 and elapsed < 300
    verdict(3, ok, f"gm mean {np.mean(est):.3f} vs 25 (rel err {rel:.3%}), sketched agreement {agree}/200, "
                   f"{elapsed:.1f}s")
    assert ok


def test_criterion_4_utility(verdict):
    algs = ["pc", "fedpc", "pc-voting", "pc-cit-voting"]
    res = run_experiment(ExperimentConfig(d=[20], n=10_000, k=[10], reps=10, algorithms=algs))
    m = {a: res.mean_shd(a) for a in algs}
    ok = abs(m["fedpc"] - m["pc"]) <= 2.0 and m["fedpc"] < m["pc-voting"] and m["fedpc"] < m["pc-cit-voting"]
    verdict(4, ok, "mean SHD " + ", ".join(f"{a} {v:.1f}" for a, v in m.items()))
    assert ok


def test_criterion_5_heterogeneity(verdict):
    base = dict(d=[20], n=10_000, k=[4], reps=10, algorithms=["fedpc", "pc-voting"])
    hom = run_experiment(ExperimentConfig(**base))
    het = run_experiment(ExperimentConfig(**base, heterogeneity={"sharpness": 8.0}))
    fed_gap = het.mean_shd("fedpc") - hom.mean_shd("fedpc")
    vote_gap = het.mean_shd("pc-voting") - hom.mean_shd("pc-voting")
    ok = abs(fed_gap) <= 2.0 and vote_gap >= 3.0
    verdict(5, ok, f"FedPC {hom.mean_shd('fedpc'):.1f} -> {het.mean_shd('fedpc'):.1f} ({fed_gap:+.1f}), "
                   f"PC-Voting {hom.mean_shd('pc-voting'):.1f} -> {het.mean_shd('pc-voting'):.1f} ({vote_gap:+.1f})")
    assert ok


def test_criterion_6_dropout(verdict):
    out = dropout_experiment(ExperimentConfig(d=[20], n=10_000, k=[10], reps=10, algorithms=["fedpc"]), 0.2)
    inc = out["delta"][0]["shd_increase"]
    ok = inc <= 2.0
    verdict(6, ok, f"FedPC {out['baseline'].mean_shd('fedpc'):.1f} -> {out['dropout'].mean_shd('fedpc'):.1f} "
                   f"with 20% dropout ({inc:+.1f})")
    assert ok


TRANSCRIPT_KEYS = {"round_id", "label", "participants", "vector_len", "masked", "dropped", "revealed_pairs",
                   "aggregate", "unprotected"}


def test_criterion_7_secure_aggregation_fuzz(verdict):
    rng = np.random.default_rng(7)
    codec = FixedPointCodec()
    count_err = real_fail = leaks = flagged_solo = 0
    for trial in range(1000):
        k = int(rng.integers(1, 33))
        m = int(rng.integers(1, 257))
        ids = list(range(k))
        dropped = set(rng.choice(k, int(rng.integers(0, k)), replace=False).tolist()) if k > 1 else set()
        survivors = [c for c in ids if c not in dropped]
        real = bool(rng.integers(2))
        if real:
            values = {c: rng.normal(0, 1000, m) for c in ids}
            payloads = {c: codec.encode(v) for c, v in values.items()}
        else:
            values = {c: rng.integers(-(10**6), 10**6, m) for c in ids}
            payloads = {c: np.asarray(v, dtype=np.int64).view(np.uint64) for c, v in values.items()}
        rnd = setup_round(ids, m, seed=int(rng.integers(2**62)), round_id=f"fuzz{trial}")
        rnd.inject_dropout(dropped)
        for c in rng.permutation(survivors):
            rnd.submit(int(c), payloads[int(c)])
        agg, tr = rnd.aggregate()
        if real:
            exact = np.sum([values[c] for c in survivors], axis=0)
            real_fail += np.max(np.abs(codec.decode(agg) - exact)) > len(survivors) / codec.scale
        else:
            exact = np.sum([values[c] for c in survivors], axis=0)
            count_err += not np.array_equal(agg.view(np.int64), exact)
        doc = json.loads(tr.to_json())
        assert set(doc) == TRANSCRIPT_KEYS
        if len(ids) == 1:
            flagged_solo += doc["unprotected"]
            continue
        raw = {tuple(int(x) for x in payloads[c]) for c in ids}
        leaks += sum(tuple(v) in raw for v in doc["masked"].values())
    ok = count_err == 0 and real_fail == 0 and leaks == 0
    verdict(7, ok, f"count mismatches {count_err}, fixed-point bound violations {real_fail}, raw payloads in "
                   f"transcripts {leaks} (single-client rounds flagged unprotected: {flagged_solo})")
    assert ok


SACHS_REFERENCE = 5.6


def test_criterion_8_sachs_smoke(verdict):
    path = os.environ.get("SACHS_CSV")
    if not path or not os.path.exists(path):
        verdict(8, True, "skipped: set SACHS_CSV to the discretized 853 x 11 table (informational)", "SKIP")
        pytest.skip("SACHS_CSV not provided")
    cfg = ExperimentConfig(dataset=path, truth="sachs", k=[2, 64], reps=1, algorithms=["fedpc"])
    times, shds = {}, {}
    for k in (2, 64):
        inst = load_instance(cfg, k, 0)
        start = time.perf_counter()
        res = fedpc(inst.partition, seed=0)
        times[k] = time.perf_counter() - start
        shds[k] = shd(res.pattern, dag_to_cpdag(sachs_truth())).shd
    near = abs(shds[64] - SACHS_REFERENCE) <= 3
    ok = max(times.values()) < 300
    verdict(8, ok, f"SHD K=2 {shds[2]}, K=64 {shds[64]} (reference {SACHS_REFERENCE} +/- 3: "
                   f"{'within' if near else 'outside'}), max time {max(times.values()):.1f}s; informational")
    assert ok
