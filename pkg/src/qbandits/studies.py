"""Canned studies behind the ``audit``, ``sweep`` and ``tomography`` commands."""

from __future__ import annotations

import math

import numpy as np

from .audits import (bretagnolle_huber_audit, data_processing_audit, divergence_audit,
                     enumerate_trajectories, least_pulled)
from .bandit import DiscreteActions, Environment, Rank1Actions
from .harness import Task, _mean_se, replicate_seed, run_tasks
from .lowerbounds import lemma5_closed_form, lemma5_pair, make_pauli_pair
from .policies import FixedArmPolicy, TwoPhasePolicy, UniformPolicy, make_policy
from .policies.tomography import simulate_pls
from .quantum import (pauli_strings, random_density_matrix, random_pure_state, relative_entropy,
                      trace_norm)

LEMMA5_DELTAS = tuple(round(0.05 * i, 2) for i in range(1, 19))  # 0.05 .. 0.90
SWEEP_COLUMNS = ("policy", "n", "env", "mean_regret", "stderr", "normalizer", "ratio")
TAIL_COLUMNS = ("n", "eps", "reps", "failures", "rate", "bound", "stderr", "pass")


def lemma5_rows(deltas=LEMMA5_DELTAS, tol=1e-10):
    rows = []
    for delta in deltas:
        computed = relative_entropy(*lemma5_pair(delta))
        closed = lemma5_closed_form(delta)
        gap = abs(computed - closed)
        rows.append(dict(lemma="5", params=f"delta={delta!r}", lhs=computed, rhs=closed, gap=gap,
                         passed=gap <= tol))
    return rows


def bretagnolle_huber_rows(pairs=10_000, seed=0):
    """Random Bernoulli pairs, all four events. One row per pair (worst event)."""
    rng = np.random.default_rng(seed)
    events = [(), (0,), (1,), (0, 1)]
    rows = []
    for i in range(pairs):
        p, q = (float(v) for v in rng.random(2))
        P, Q = np.array([p, 1 - p]), np.array([q, 1 - q])
        worst1 = worst2 = order = math.inf
        for ev in events:
            lhs, r1, r2 = bretagnolle_huber_audit(P, Q, list(ev))
            worst1 = min(worst1, lhs - r1)
            worst2 = min(worst2, lhs - r2)
            order = min(order, r2 - r1)
        rows.append(dict(lemma="1-2", params=f"p={p!r};q={q!r}", lhs=worst1, rhs=worst2, gap=order,
                         passed=worst1 >= -1e-12 and worst2 >= -1e-12 and order >= -1e-12))
    return rows


def audit_policies(n):
    return (("uniform", UniformPolicy()), ("always_arm_1", FixedArmPolicy(arm=1)),
            ("two_phase", TwoPhasePolicy(switch=math.ceil(n / 2))))


def pauli_audit_cases(ns=(1, 2, 3, 4), ks=(2, 3), deltas=(0.1, 0.2)):
    """Every (policy, pair, n, k) instance of the exact divergence audits, on one qubit.

    ``l`` is the least pulled arm other than the first under ``rho``, from
    exact pull counts.
    """
    for k in ks:
        arms = DiscreteActions(tuple(pauli_strings(1)[:k]))
        for delta in deltas:
            for n in ns:
                for name, pol in audit_policies(n):
                    base = make_pauli_pair(arms, delta, 1)
                    e = enumerate_trajectories(base.rho, base.rho, arms, pol, n)
                    pair = make_pauli_pair(arms, delta, least_pulled(e.pulls))
                    yield dict(policy=name, k=k, delta=delta, n=n, l=pair.meta["l"]), pair, pol, arms


def _params(case):
    return ";".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in case.items())


def divergence_rows(cases=None, tol=1e-9):
    rows = []
    for case, pair, pol, arms in cases or pauli_audit_cases():
        a = divergence_audit(pair, pol, case["n"], arms)
        rows.append(dict(lemma="3", params=_params(case), lhs=a.lhs, rhs=a.rhs, gap=a.gap,
                         passed=a.gap <= tol))
    return rows


def processing_rows(cases=None, tol=1e-9):
    rows = []
    for case, pair, pol, arms in cases or pauli_audit_cases():
        a = data_processing_audit(pair, pol, case["n"], arms)
        for alpha, lhs, rhs in (("1", a.kl_lhs, a.kl_rhs), ("1/2", a.half_lhs, a.half_rhs)):
            rows.append(dict(lemma="4", params=_params(dict(case, alpha=alpha)), lhs=lhs, rhs=rhs,
                             gap=rhs - lhs, passed=rhs - lhs >= -tol))
    return rows


def lemma_rows(lemma, n=None, k=None, delta=None, seed=0):
    lemma = str(lemma)
    pick = dict(ns=(n,) if n else (1, 2, 3, 4), ks=(k,) if k else (2, 3),
                deltas=(delta,) if delta is not None else (0.1, 0.2))
    if lemma in ("1", "2"):
        return bretagnolle_huber_rows(seed=seed)
    if lemma == "3":
        return divergence_rows(list(pauli_audit_cases(**pick)))
    if lemma == "4":
        return processing_rows(list(pauli_audit_cases(**pick)))
    if lemma == "5":
        return lemma5_rows((delta,) if delta is not None else LEMMA5_DELTAS)
    raise ValueError(f"unknown lemma {lemma!r}")


# -- PLS tail ------------------------------------------------------------------------------

def pls_tail_bound(n, eps, d=2, r=1):
    return 1.5 * math.exp(-n * eps**2 / (43 * d * d * r * r))


def pls_tail_rows(n_grid, eps_grid, reps, seed=0, d=2):
    """Failure rate of PLS on random pure states versus the exponential tail."""
    rows = []
    for n in n_grid:
        errs = np.empty(reps)
        for i in range(reps):
            rng = np.random.default_rng(replicate_seed(seed, "pls_tail", f"n={n}", i))
            rho = random_pure_state(d, rng)
            errs[i] = trace_norm(simulate_pls(rho, n, rng) - rho)
        for eps in eps_grid:
            fails = int(np.sum(errs > eps))
            bound = pls_tail_bound(n, eps, d)
            q = min(bound, 1.0)
            se = math.sqrt(q * (1 - q) / reps)
            rate = fails / reps
            rows.append(dict(n=n, eps=eps, reps=reps, failures=fails, rate=rate, bound=bound, stderr=se,
                             **{"pass": rate <= bound + 3 * se}))
    return rows


# -- scaling sweeps -------------------------------------------------------------------------

def normalizer(policy_name, n, d, k):
    if policy_name == "linucb":
        return d * d * math.sqrt(n) * math.log(n)
    if policy_name == "ucb":
        return math.sqrt(n * k * math.log(n))
    if policy_name == "phased_elim":
        return d * math.sqrt(n * math.log(n * k))
    if policy_name == "bandit_pls":
        return math.sqrt(n) * math.log(n)
    return float(n)


def sweep_environments(policy_name, count, seed=0):
    """Random qubit environments: pure states for Bandit PLS, full rank otherwise."""
    rng = np.random.default_rng(seed)
    if policy_name == "bandit_pls":
        return Rank1Actions(2), [Environment(random_pure_state(2, rng), f"pure{i}", True) for i in range(count)]
    arms = DiscreteActions(tuple(pauli_strings(1)))
    return arms, [Environment(random_density_matrix(2, rng), f"mixed{i}") for i in range(count)]


def sweep_rows(policy_spec, horizons, envs=20, reps=5, seed=0, threads=1):
    """Mean regret over ``reps`` seeds per environment, divided by the policy's rate."""
    policy = make_policy(policy_spec)
    actions, environments = sweep_environments(policy.name, envs, seed)
    d = actions.dim
    k = getattr(actions, "k", None)
    tasks, index = [], []
    for env in environments:
        for n in horizons:
            for r in range(reps):
                tasks.append(Task(env, actions, policy, n, replicate_seed(seed, policy.name, f"{env.label}@{n}", r)))
                index.append((env.label, n))
    finals = {}
    for key, out in zip(index, run_tasks(tasks, threads)):
        finals.setdefault(key, []).append(out.final_regret)
    rows = []
    for env in environments:
        for n in horizons:
            mean, se = _mean_se(finals[(env.label, n)])
            norm = normalizer(policy.name, n, d, k)
            rows.append(dict(policy=policy.name, n=n, env=env.label, mean_regret=float(mean), stderr=float(se),
                             normalizer=norm, ratio=float(mean) / norm))
    return rows
