"""The 13 acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed together at the end of the run.
"""

import json
import math
import time

import numpy as np
import pytest

from qbandits import studies
from qbandits.bandit import DiscreteActions, Environment, Rank1Actions, cumulative_regret, gap_report, run_episode
from qbandits.cli import main
from qbandits.harness import Task, adversarial_eval, cpu_threads, replicate_seed, run_tasks
from qbandits.policies import (UCB, BanditPLS, LinUCB, PhasedElimination, UniformPolicy, g_optimal_design,
                               project_to_density)
from qbandits.policies.pls import ceil_sqrt, exploration_arms
from qbandits.quantum import (Observable, pauli_matrix, pauli_strings, random_density_matrix, random_hermitian,
                              random_pure_state, spectral_decompose)

pytestmark = pytest.mark.acceptance

REPORT = {}
THREADS = cpu_threads(0)


def record(num, ok, detail, started):
    REPORT[num] = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.time() - started:.1f}s)"
    print(REPORT[num])
    return ok


# 1 -----------------------------------------------------------------------------------------------

def test_criterion_01_lemma5_closed_form():
    t0 = time.time()
    rows = studies.lemma5_rows()
    worst = max(r["gap"] for r in rows)
    elapsed = time.time() - t0
    ok = len(rows) == 18 and worst <= 1e-10 and elapsed < 1.0
    assert record(1, ok, f"18 deltas, max |computed - closed form| = {worst:.2e} (tol 1e-10)", t0)


# 2 and 3 -----------------------------------------------------------------------------------------

def test_criterion_02_divergence_decomposition():
    t0 = time.time()
    cases = list(studies.pauli_audit_cases())
    rows = studies.divergence_rows(cases)
    worst = max(r["gap"] for r in rows)
    elapsed = time.time() - t0
    ok = len(rows) == 3 * 2 * 4 * 2 and worst <= 1e-9 and elapsed < 10
    assert record(2, ok, f"{len(rows)} instances, max gap = {worst:.2e} (tol 1e-9)", t0)


def test_criterion_03_data_processing():
    t0 = time.time()
    rows = studies.processing_rows()
    slack = min(r["gap"] for r in rows)
    ok = len(rows) == 2 * 48 and slack >= -1e-9
    assert record(3, ok, f"{len(rows)} checks (alpha 1 and 1/2), min slack = {slack:.3e} (tol -1e-9)", t0)


# 4 -----------------------------------------------------------------------------------------------

def test_criterion_04_bretagnolle_huber():
    t0 = time.time()
    rows = studies.bretagnolle_huber_rows(10_000, seed=4)
    lemma1 = min(r["lhs"] for r in rows)
    lemma2 = min(r["rhs"] for r in rows)
    order = min(r["gap"] for r in rows)
    ok = all(r["passed"] for r in rows) and order >= -1e-12
    assert record(4, ok, f"1e4 pairs x 4 events, min slack lemma1 {lemma1:.2e}, lemma2 {lemma2:.2e}, "
                         f"min(rhs2 - rhs1) {order:.2e}", t0)


# 5 -----------------------------------------------------------------------------------------------

def test_criterion_05_ucb_upper_bound():
    t0 = time.time()
    n, k = 10**5, 15
    acts = DiscreteActions(tuple(pauli_strings(2)))
    rho = np.eye(4) / 4 + 0.15 * np.kron(pauli_matrix("Z"), np.eye(2))
    env = Environment(rho, "criterion5")
    tasks = [Task(env, acts, UCB(), n, replicate_seed(5, "ucb", env.label, r)) for r in range(100)]
    finals = [o.final_regret for o in run_tasks(tasks, THREADS)]
    gaps = gap_report(rho, acts).gaps
    bound = 8 * math.sqrt(n * k * math.log(n)) + gaps.sum()
    mean = float(np.mean(finals))
    elapsed = time.time() - t0
    ok = acts.k == k and mean <= bound and elapsed < 300
    assert record(5, ok, f"mean regret {mean:.1f} <= bound {bound:.1f}", t0)


# 6 and 7 -----------------------------------------------------------------------------------------

LOWER_POLICIES = (UniformPolicy(), UCB(), LinUCB(), PhasedElimination())


def test_criterion_06_thm3_floor():
    t0 = time.time()
    n, k = 4000, 15
    assert n >= 2 * (k - 1)
    recs = [adversarial_eval(p, "3", n, 400, k=k, seed=6, threads=THREADS) for p in LOWER_POLICIES]
    ok = all(r.passed for r in recs) and time.time() - t0 < 600
    detail = ", ".join(f"{r.policy} {r.max_regret:.1f}" for r in recs)
    assert record(6, ok, f"max regret over pair vs 0.95 x {recs[0].rhs:.2f}: {detail}", t0)


def test_criterion_07_thm4_floor():
    t0 = time.time()
    n = 10**4
    recs = [adversarial_eval(p, "4", n, 400, seed=7, threads=THREADS) for p in LOWER_POLICIES]
    assert all(r.delta == pytest.approx(1 / math.sqrt(n)) for r in recs)
    ok = all(r.passed for r in recs)
    detail = ", ".join(f"{r.policy} {r.max_regret:.2f}" for r in recs)
    assert record(7, ok, f"max regret over pair vs 0.95 x {recs[0].rhs:.2f}: {detail}", t0)


# 8 -----------------------------------------------------------------------------------------------

def test_criterion_08_linucb_scaling():
    t0 = time.time()
    horizons, reps = (10**3, 10**4, 10**5), 3
    acts = DiscreteActions(tuple(pauli_strings(1)))
    rng = np.random.default_rng(8)
    envs = [Environment(random_density_matrix(2, rng), f"env{i}") for i in range(20)]
    tasks, keys = [], []
    for env in envs:
        for n in horizons:
            for r in range(reps):
                tasks.append(Task(env, acts, LinUCB(), n, replicate_seed(8, "linucb", f"{env.label}@{n}", r)))
                keys.append((env.label, n))
    finals = {}
    for key, out in zip(keys, run_tasks(tasks, THREADS)):
        finals.setdefault(key, []).append(out.final_regret)
    ratios = np.array([[np.mean(finals[(e.label, n)]) / (4 * math.sqrt(n) * math.log(n)) for n in horizons]
                       for e in envs])
    monotone = int(np.sum(np.all(np.diff(ratios, axis=1) <= 0, axis=1)))
    ok = ratios.max() <= 2 and monotone >= 18 and time.time() - t0 < 600
    assert record(8, ok, f"max ratio {ratios.max():.4f} (<= 2), non-increasing in {monotone}/20 (>= 18)", t0)


# 9 -----------------------------------------------------------------------------------------------

def test_criterion_09_pls_tail():
    t0 = time.time()
    rows = studies.pls_tail_rows((400, 1600, 4000), (0.2, 0.3), 2000, seed=9)
    ok = all(r["pass"] for r in rows) and time.time() - t0 < 120
    worst = max(rows, key=lambda r: r["rate"] - r["bound"] - 3 * r["stderr"])
    assert record(9, ok, f"6 cells x 2000 reps, tightest cell n={worst['n']} eps={worst['eps']}: "
                         f"rate {worst['rate']:.4f} vs {worst['bound']:.4f} + 3se", t0)


# 10 ----------------------------------------------------------------------------------------------

def test_criterion_10_bandit_pls_regret():
    t0 = time.time()
    acts = Rank1Actions(2)
    rng = np.random.default_rng(10)
    cycle = len(exploration_arms(2))
    worst, schedule_ok = 0.0, True
    for n in (10**6, 4 * 10**6, 16 * 10**6):
        finals = []
        for s in range(50):
            env = Environment(random_pure_state(2, rng), f"pure{s}", True)
            trace = run_episode(env, acts, BanditPLS(), n, seed=replicate_seed(10, "bandit_pls", env.label, s))
            m = ceil_sqrt(n)
            head, tail = trace.actions[:m], trace.actions[m:]
            schedule_ok &= trace.flags["explore_rounds"] == m
            schedule_ok &= bool(np.array_equal(head, np.arange(m) % cycle))
            schedule_ok &= bool(np.all(tail == tail[0]))
            finals.append(cumulative_regret(trace, gap_report(env.state, acts, env.label))[-1])
        worst = max(worst, float(np.mean(finals)) / (math.sqrt(n) * math.log(n)))
    ok = worst <= 1 and schedule_ok and time.time() - t0 < 600
    assert record(10, ok, f"max ratio {worst:.4f} (<= 1), exploration exactly ceil(sqrt n): {schedule_ok}", t0)


# 11 ----------------------------------------------------------------------------------------------

def test_criterion_11_g_optimal_design():
    t0 = time.time()
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(100):
        p = int(rng.integers(1, 7))
        k = int(rng.integers(p, 3 * p + 8))
        X = rng.normal(size=(k, int(rng.integers(p, p + 3))))
        X = X[:, :p] @ rng.normal(size=(p, X.shape[1]))  # span of dimension p
        res = g_optimal_design(X, 1e-2)
        bad += not (res.span_dim == p and res.g <= p * 1.01 and len(res.support) <= p * (p + 1) // 2)
    two = g_optimal_design(np.eye(2))
    w = np.linspace(0, 1, 1_000_001)
    brute = w[np.argmax(w * (1 - w))]  # det of w e1e1' + (1-w) e2e2'
    grid_ok = np.allclose(two.weights, [brute, 1 - brute], atol=1e-6)
    ok = bad == 0 and grid_ok
    assert record(11, ok, f"100 random instances, {bad} failures; two-vector weights {two.weights.round(8)}", t0)


# 12 ----------------------------------------------------------------------------------------------

def test_criterion_12_projection_oracles():
    t0 = time.time()
    rng = np.random.default_rng(12)
    proj_fail = 0
    for i in range(1000):
        d = 2 + i % 3
        L = random_hermitian(d, rng)
        P = project_to_density(L)
        cands = [random_density_matrix(d, rng, int(rng.integers(1, d + 1))) for _ in range(100)]
        best = min(np.linalg.norm(L - C) for C in cands)
        proj_fail += not (np.allclose(project_to_density(P), P, atol=1e-10) and np.linalg.norm(L - P) <= best)
    spec_err = 0.0
    for d in (2, 3, 4, 8):
        for _ in range(1000):
            O = Observable.from_matrix(random_hermitian(d, rng))
            spec_err = max(spec_err, float(np.max(np.abs(spectral_decompose(O.op).reconstruct() - O.op))))
    ok = proj_fail == 0 and spec_err <= 1e-9
    assert record(12, ok, f"projection failures {proj_fail}/1000, max reconstruction error {spec_err:.2e}", t0)


# 13 ----------------------------------------------------------------------------------------------

def test_criterion_13_thread_determinism(tmp_path):
    t0 = time.time()
    cfg = {
        "environment": {"kind": "pauli_mix", "label": "zi_bias", "terms": {"ZI": 0.15}},
        "action_set": {"kind": "pauli", "qubits": 2},
        "policies": ["ucb", "uniform", "phased_elim", "linucb"],
        "horizons": [500, 2000],
        "replicates": 8,
        "seed": 13,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    codes = [main(["run", str(path), "--threads", t, "--out", str(tmp_path / t)]) for t in ("1", "8")]
    a, b = ((tmp_path / t / "summary.csv").read_bytes() for t in ("1", "8"))
    ok = codes == [0, 0] and a == b and len(a) > 0
    assert record(13, ok, f"summary.csv identical across --threads 1 and 8: {a == b} ({len(a)} bytes)", t0)
