"""Seeded, replicated experiments and their CSV/JSONL outputs.

Replicate seeds come from a stable hash of (master seed, policy label,
environment label, replicate index), so results do not depend on the order
of policies in a config or on how many workers run them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audits import AUDIT_COLUMNS
from .bandit import (STEP_COLUMNS, DiscreteActions, Environment, Rank1Actions, cumulative_regret,
                     gap_report, run_episode, trace_rows)
from .lowerbounds import (adversarial_delta, bound_rhs, make_allpure_pair, make_general_pair,
                          make_pauli_pair, make_pure_qubit_pair, make_qubit_rank1_pair)
from .policies import FixedArmPolicy, make_policy
from .quantum import (Observable, bloch_to_state, density_matrix, maximally_mixed, pauli_matrix,
                      pauli_strings, pure_state, random_density_matrix, random_pure_state)

CONFIG_KEYS = {"environment", "action_set", "policies", "horizons", "replicates", "seed",
               "checkpoints", "output_dir"}
REQUIRED_KEYS = {"environment", "action_set", "policies", "horizons"}
SUMMARY_COLUMNS = ("policy", "n", "mean_regret", "stderr", "bound_tag", "bound_rhs", "pass")
CURVE_COLUMNS = ("policy", "horizon", "t", "mean_regret", "stderr", "replicates")
DEFAULT_CHECKPOINTS = 32


class ConfigError(ValueError):
    pass


# -- seeds and formatting ----------------------------------------------------------

def replicate_seed(master, policy, env, replicate):
    """Stable 64-bit seed for one replicate."""
    key = f"{int(master)}\x1f{policy}\x1f{env}\x1f{int(replicate)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def fmt(x):
    """Shortest round-trip text for numbers; booleans as ``true``/``false``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return "" if x is None else str(x)


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else fmt(x)
    return x


def write_table(path, columns, rows, form="csv"):
    """Write ``rows`` (mappings) as CSV or JSON lines; returns the path written."""
    path = Path(path)
    if form == "jsonl":
        path = path.with_suffix(".jsonl")
    buf = io.StringIO()
    if form == "jsonl":
        for r in rows:
            buf.write(json.dumps({c: _jsonable(r.get(c)) for c in columns}) + "\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# -- config ------------------------------------------------------------------------------

def build_actions(spec):
    kind = spec.get("kind", "pauli")
    if kind == "pauli":
        strings = pauli_strings(int(spec.get("qubits", 1)), bool(spec.get("include_identity", False)))
        if "labels" in spec:
            by_label = {P.label: P for P in strings}
            try:
                strings = [by_label[s] for s in spec["labels"]]
            except KeyError as exc:
                raise ConfigError(f"unknown Pauli label {exc}") from None
        elif "k" in spec:
            strings = strings[: int(spec["k"])]
        return DiscreteActions(tuple(strings))
    if kind == "rank1":
        return Rank1Actions(int(spec.get("dim", 2)))
    if kind == "bloch_projectors":
        arms = [Observable.from_matrix(bloch_to_state(r), label=f"r{i}")
                for i, r in enumerate(spec["directions"])]
        return DiscreteActions(tuple(arms))
    if kind == "observables":
        arms = [Observable.from_matrix(_matrix(m), label=f"O{i}") for i, m in enumerate(spec["matrices"])]
        return DiscreteActions(tuple(arms))
    raise ConfigError(f"unknown action set kind {kind!r}")


def _matrix(m):
    if isinstance(m, dict):
        return np.asarray(m["real"], dtype=float) + 1j * np.asarray(m.get("imag", 0.0), dtype=float)
    return np.asarray(m, dtype=complex)


def build_environment(spec, actions):
    kind = spec.get("kind")
    label = spec.get("label", kind)
    d = actions.dim
    if kind == "maximally_mixed":
        rho = maximally_mixed(d)
    elif kind == "pauli_mix":
        rho = np.eye(d, dtype=complex) / d
        for lab, c in spec.get("terms", {}).items():
            rho = rho + float(c) * pauli_matrix(lab)
    elif kind == "bloch":
        rho = bloch_to_state(spec["r"])
    elif kind == "pure":
        amps = spec["amplitudes"]
        psi = np.array([complex(*a) if isinstance(a, (list, tuple)) else a for a in amps], dtype=complex)
        rho = pure_state(psi)
    elif kind == "matrix":
        rho = _matrix(spec["matrix"])
    elif kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        if spec.get("pure"):
            rho = random_pure_state(d, rng)
        else:
            rho = random_density_matrix(d, rng, spec.get("rank"))
    elif kind == "lowerbound":
        pair = build_pair(str(spec["theorem"]), actions, float(spec["delta"]), spec.get("l"))
        rho = pair.rho_prime if spec.get("prime") else pair.rho
    else:
        raise ConfigError(f"unknown environment kind {kind!r}")
    rho = density_matrix(rho)
    pure = bool(np.real(np.trace(rho @ rho)) >= 1 - 1e-9)
    return Environment(rho, label, pure)


def build_pair(theorem, actions, delta, l=None):
    tag = theorem.lower().removeprefix("thm")
    if tag == "1":
        return make_general_pair(actions, delta)
    if tag == "2":
        return make_qubit_rank1_pair(actions, delta)
    if tag == "3":
        return make_pauli_pair(actions, delta, 1 if l is None else int(l))
    if tag == "4":
        return make_pure_qubit_pair(delta)
    if tag == "5":
        return make_allpure_pair(actions.dim, delta)
    raise ConfigError(f"unknown theorem {theorem!r}")


def checkpoint_schedule(n, spec=None):
    if spec is None:
        spec = DEFAULT_CHECKPOINTS
    if isinstance(spec, int):
        pts = np.unique(np.round(np.geomspace(1, n, max(spec, 1))).astype(int))
    else:
        pts = np.asarray(sorted({int(t) for t in spec if 1 <= int(t) <= n} | {n}))
    return pts


@dataclass(frozen=True)
class ExperimentConfig:
    environment: dict
    action_set: dict
    policies: tuple
    horizons: tuple
    replicates: int = 1
    seed: int = 0
    checkpoints: object = DEFAULT_CHECKPOINTS
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = REQUIRED_KEYS - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        horizons = tuple(int(h) for h in raw["horizons"])
        if not horizons or any(h < 1 for h in horizons) or any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ConfigError("horizons must be positive and strictly increasing")
        reps = int(raw.get("replicates", 1))
        if reps < 1:
            raise ConfigError("replicates must be at least 1")
        pols = tuple(p if isinstance(p, dict) else {"name": p} for p in raw["policies"])
        if not pols:
            raise ConfigError("at least one policy is required")
        labels = [policy_label(p) for p in pols]
        if len(set(labels)) != len(labels):
            raise ConfigError("policy labels must be unique")
        return cls(dict(raw["environment"]), dict(raw["action_set"]), pols, horizons, reps,
                   int(raw.get("seed", 0)), raw.get("checkpoints", DEFAULT_CHECKPOINTS),
                   str(raw.get("output_dir", "results")))

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)


def policy_label(spec):
    return spec.get("label", spec.get("name"))


def policy_from_spec(spec):
    spec = {k: v for k, v in spec.items() if k != "label"}
    return make_policy(spec)


# -- parallel execution ----------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    env: Environment
    actions: object
    policy: object
    n: int
    seed: int
    checkpoints: tuple = ()
    keep_trace: bool = False


@dataclass(frozen=True)
class Outcome:
    final_regret: float
    checkpoint_regret: np.ndarray
    pulls: np.ndarray | None
    flags: dict
    trace: object = None


def _execute(task):
    trace = run_episode(task.env, task.actions, task.policy, task.n, seed=task.seed)
    report = gap_report(task.env.state, task.actions, task.env.label)
    pulls = trace.pull_counts(task.actions.k) if trace.arm_table is None else None
    cum = cumulative_regret(trace, report)
    cps = np.asarray(task.checkpoints, dtype=int)
    return Outcome(float(cum[-1]), cum[cps - 1] if len(cps) else np.empty(0), pulls,
                   trace.flags, trace if task.keep_trace else None)


def run_tasks(tasks, threads=1):
    """Run tasks in order-preserving fashion; ``threads`` only changes speed."""
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [_execute(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_execute, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / math.sqrt(len(values)) if len(values) > 1 else np.zeros_like(mean)
    return mean, se


# -- experiments ------------------------------------------------------------------------------

@dataclass(frozen=True)
class RegretCurve:
    policy: str
    horizon: int
    checkpoints: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicates: int
    finals: np.ndarray


@dataclass
class AggregateReport:
    curves: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    traces: list = field(default_factory=list)  # (trace, gap report) pairs when kept
    flags: dict = field(default_factory=dict)


def ucb_upper_bound(n, gaps):
    """``8 sqrt(n k log n) + sum of gaps``."""
    k = len(gaps)
    return 8 * math.sqrt(n * k * math.log(n)) + float(np.sum(gaps))


def run_experiment(cfg, threads=1, keep_traces=False):
    actions = build_actions(cfg.action_set)
    env = build_environment(cfg.environment, actions)
    report = gap_report(env.state, actions, env.label)
    out = AggregateReport()
    for spec in sorted(cfg.policies, key=policy_label):
        label = policy_label(spec)
        policy = policy_from_spec(spec)
        for n in cfg.horizons:
            cps = checkpoint_schedule(n, cfg.checkpoints)
            seeds = [replicate_seed(cfg.seed, label, env.label, r) for r in range(cfg.replicates)]
            tasks = [Task(env, actions, policy, n, s, tuple(cps), keep_traces) for s in seeds]
            results = run_tasks(tasks, threads)
            mean, se = _mean_se([r.checkpoint_regret for r in results])
            finals = np.array([r.final_regret for r in results])
            out.curves.append(RegretCurve(label, n, cps, mean, se, len(results), finals))
            fmean, fse = _mean_se(finals)
            row = dict(policy=label, n=n, mean_regret=float(fmean), stderr=float(fse),
                       bound_tag="", bound_rhs=None, **{"pass": None})
            if spec.get("name") == "ucb" and report.gaps is not None and n >= 2:
                rhs = ucb_upper_bound(n, report.gaps)
                row.update(bound_tag="ucb_upper", bound_rhs=rhs, **{"pass": bool(fmean <= rhs)})
            out.summary.append(row)
            if keep_traces:
                out.traces += [(r.trace, report) for r in results]
            infeasible = sum(bool(r.flags.get("pls_infeasible")) for r in results)
            if infeasible:
                out.flags[f"{label}@{n}:pls_infeasible"] = infeasible
    return out


def curve_rows(report):
    for c in report.curves:
        for t, m, s in zip(c.checkpoints, c.mean, c.stderr):
            yield dict(policy=c.policy, horizon=c.horizon, t=int(t), mean_regret=float(m),
                       stderr=float(s), replicates=c.replicates)


def emit_summary(report, path, form="csv"):
    return write_table(path, SUMMARY_COLUMNS, report.summary, form)


def emit_curves(report, path, form="csv"):
    return write_table(path, CURVE_COLUMNS, list(curve_rows(report)), form)


def emit_csv(report, path, form="csv"):
    """Step-level rows of every kept trace."""
    rows = []
    for trace, gr in report.traces:
        rows += [dict(zip(STEP_COLUMNS, r)) for r in trace_rows(trace, gr)]
    return write_table(path, STEP_COLUMNS, rows, form)


def emit_audits(rows, path, form="csv"):
    return write_table(path, AUDIT_COLUMNS, [dict(r, **{"pass": r.get("passed")}) for r in rows], form)


def read_table(path):
    path = Path(path)
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in path.read_text().splitlines() if line]
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- pull counts and adversarial pairs ----------------------------------------------------------

@dataclass(frozen=True)
class PullEstimate:
    means: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray  # replicates x arms
    l: int | None


def estimate_pull_counts(policy, env, actions, n, reps, seed=0, label=None, exclude=0, threads=1):
    """Monte Carlo ``E[T_a(n)]`` and the least-pulled arm other than ``exclude``."""
    if not isinstance(actions, DiscreteActions):
        raise ValueError("pull counts need a discrete action set")
    label = label or policy.name
    tasks = [Task(env, actions, policy, n, replicate_seed(seed, label, env.label, r)) for r in range(reps)]
    counts = np.array([r.pulls for r in run_tasks(tasks, threads)], dtype=float)
    mean, se = _mean_se(counts)
    order = [j for j in range(actions.k) if j != exclude]
    l = min(order, key=lambda j: (mean[j], j)) if order else None
    return PullEstimate(mean, se, counts, l)


def default_actions(theorem, k=None, d=2):
    tag = str(theorem).lower().removeprefix("thm")
    if tag in ("1", "3"):
        k = k or 3
        m = 1
        while 4**m - 1 < k:
            m += 1
        return DiscreteActions(tuple(pauli_strings(m)[:k]))
    if tag == "2":
        k = k or 2
        dirs = [(math.cos(math.pi * i / k), 0.0, math.sin(math.pi * i / k)) for i in range(k)]
        return build_actions(dict(kind="bloch_projectors", directions=dirs))
    if tag == "4":
        return DiscreteActions(tuple(pauli_strings(1)))
    if tag == "5":
        return Rank1Actions(d)
    raise ValueError(f"unknown theorem {theorem!r}")


@dataclass(frozen=True)
class AdversarialRecord:
    theorem: str
    policy: str
    n: int
    k: int | None
    delta: float
    regret: tuple  # (mean on rho, mean on rho')
    stderr: tuple
    rhs: float
    tolerance: float
    meta: dict

    @property
    def max_regret(self):
        return max(self.regret)

    @property
    def max_stderr(self):
        return self.stderr[int(np.argmax(self.regret))]

    @property
    def degenerate(self):
        return self.delta == 0

    @property
    def passed(self):
        return self.max_regret >= self.tolerance * self.rhs

    def row(self):
        return dict(policy=self.policy, n=self.n, mean_regret=self.max_regret, stderr=self.max_stderr,
                    bound_tag=self.theorem, bound_rhs=self.rhs, **{"pass": self.passed})


def _regret_runs(env, actions, policy, n, reps, seed, label, threads):
    tasks = [Task(env, actions, policy, n, replicate_seed(seed, label, env.label, r)) for r in range(reps)]
    return run_tasks(tasks, threads)


def adversarial_eval(policy, theorem, n, reps, k=None, d=2, actions=None, seed=0, threads=1,
                     pull_reps=None, tolerance=0.95, label=None, delta=None):
    """Mean regret of ``policy`` on both states of a theorem's hard pair.

    For the Pauli construction the regret on ``rho`` reuses the pull-count
    runs that select ``l``.
    """
    tag = str(theorem).lower().removeprefix("thm")
    theorem = f"thm{tag}"
    actions = actions or default_actions(tag, k, d)
    k = getattr(actions, "k", None)
    label = label or policy.name
    delta = adversarial_delta(tag, n, k) if delta is None else delta
    meta = {}
    if tag == "3":
        base = make_pauli_pair(actions, delta, 1)
        env = Environment(base.rho, f"{theorem}:rho")
        est = estimate_pull_counts(policy, env, actions, n, pull_reps or reps, seed, label, 0, threads)
        pair = make_pauli_pair(actions, delta, est.l)
        gaps = gap_report(pair.rho, actions).gaps
        r_rho = est.counts @ gaps
        env_p = Environment(pair.rho_prime, f"{theorem}:rho_prime")
        r_prime = [o.final_regret for o in _regret_runs(env_p, actions, policy, n, reps, seed, label, threads)]
        meta.update(l=est.l, pulls=est.means)
        rhs = bound_rhs(theorem, n, k=k).rhs
    else:
        pair = build_pair(theorem, actions, delta)
        envs = [Environment(pair.rho, f"{theorem}:rho"), Environment(pair.rho_prime, f"{theorem}:rho_prime")]
        r_rho, r_prime = ([o.final_regret for o in _regret_runs(e, actions, policy, n, reps, seed, label, threads)]
                          for e in envs)
        if tag == "1":
            rep = bound_rhs(theorem, n, actions=actions)
        elif tag == "2":
            rep = bound_rhs(theorem, n, c=pair.meta["c"])
        elif tag == "5":
            rep = bound_rhs(theorem, n, d=actions.dim)
        else:
            rep = bound_rhs(theorem, n)
        rhs = rep.rhs
        meta.update({key: v for key, v in pair.meta.items() if np.isscalar(v)})
    m1, s1 = _mean_se(r_rho)
    m2, s2 = _mean_se(r_prime)
    return AdversarialRecord(theorem, label, n, k, delta, (float(m1), float(m2)), (float(s1), float(s2)),
                             rhs, tolerance, meta)


def oracle_policy(actions, env):
    """The fixed best arm of ``env``: a cheating baseline, excluded from claims."""
    return FixedArmPolicy(arm=gap_report(env.state, actions).best_arm, name="oracle")


def cpu_threads(requested):
    return max(1, int(requested or 1)) if requested != 0 else (os.cpu_count() or 1)
