"""Bandit protocol: action sets, Born-rule rewards, episodes and regret."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from .quantum import (
    NumericalError,
    density_matrix,
    expected_value,
    purity,
)

PROB_TOL = 1e-9
CLIP_TOL = 1e-12


class IncompatibleActionSetError(ValueError):
    """A policy was paired with an action set it cannot play."""


class InvalidArmError(ValueError):
    """A policy returned an arm that is not in the action set."""


# ---------------------------------------------------------------------------
# action sets and environments


@dataclass(frozen=True)
class DiscreteActions:
    arms: tuple

    def __post_init__(self):
        arms = tuple(self.arms)
        if not arms:
            raise ValueError("a discrete action set needs at least one arm")
        dims = {a.dim for a in arms}
        if len(dims) != 1:
            raise ValueError(f"arms act on different dimensions: {sorted(dims)}")
        bad = [a.label or str(i) for i, a in enumerate(arms) if not a.subnormalised]
        if bad:
            raise ValueError(f"arms must satisfy ||O|| <= 1; offending: {bad}")
        object.__setattr__(self, "arms", arms)

    @property
    def dim(self):
        return self.arms[0].dim

    @property
    def k(self):
        return len(self.arms)

    def __len__(self):
        return len(self.arms)

    def __getitem__(self, i):
        return self.arms[i]

    @property
    def labels(self):
        return [a.label or f"arm{i}" for i, a in enumerate(self.arms)]


@dataclass(frozen=True)
class Rank1Actions:
    """All rank-1 projectors ``|phi><phi|`` on ``C^dim``."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("rank-1 action sets need dim >= 2")


ActionSet = Union[DiscreteActions, Rank1Actions]


def canonical_arm(phi):
    """Normalise ``phi`` and fix its global phase (first nonzero entry real > 0)."""
    phi = np.asarray(phi, dtype=complex).ravel()
    nrm = np.linalg.norm(phi)
    if nrm == 0:
        raise InvalidArmError("zero vector is not an arm")
    phi = phi / nrm
    nz = np.flatnonzero(np.abs(phi) > 1e-12)
    phase = phi[nz[0]] / abs(phi[nz[0]])
    phi = phi / phase
    phi[nz[0]] = abs(phi[nz[0]])
    return phi


def arm_label(phi):
    return ";".join(f"{z.real!r}:{z.imag!r}" for z in np.asarray(phi))


@dataclass(frozen=True)
class Environment:
    state: np.ndarray
    label: str = "env"
    pure: bool = False

    def __post_init__(self):
        rho = density_matrix(self.state)
        if self.pure and purity(rho) < 1 - 1e-9:
            raise ValueError(f"environment {self.label!r} is flagged pure but Tr(rho^2) = {purity(rho)!r}")
        object.__setattr__(self, "state", rho)

    @property
    def dim(self):
        return self.state.shape[0]


# ---------------------------------------------------------------------------
# Born rule


def reward_distribution(rho, O):
    """Outcome distribution of measuring ``O`` on ``rho`` as ``[(value, prob), ...]``."""
    rho = np.asarray(rho)
    if rho.shape != O.op.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs arm {O.op.shape}")
    probs = np.array([np.real(np.vdot(P, rho)) for P in O.spectrum.projectors])
    if np.any(probs < -CLIP_TOL):
        raise NumericalError(f"negative Born probability {probs.min()!r}")
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise NumericalError(f"Born probabilities sum to {total!r}")
    probs = probs / total
    return [(float(v), float(p)) for v, p in zip(O.spectrum.eigenvalues, probs)]


def _cdf(dist):
    return list(np.cumsum([p for _, p in dist])[:-1])


def _inverse_cdf(values, cdf, u):
    return values[bisect_right(cdf, u)]


def born_sample(rho, O, rng):
    dist = reward_distribution(rho, O)
    return _inverse_cdf([v for v, _ in dist], _cdf(dist), rng.random())


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True)
class GapReport:
    best_value: float
    gaps: Optional[np.ndarray]  # None for rank-1 action sets
    label: str = ""
    means: Optional[np.ndarray] = None
    state: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def best_arm(self):
        if self.gaps is None:
            raise ValueError("continuous action sets have no best arm index")
        return int(np.argmin(self.gaps))

    def gap(self, arm):
        """Gap of a discrete arm index or of a rank-1 arm vector."""
        if self.gaps is not None:
            return float(self.gaps[arm])
        phi = np.asarray(arm, dtype=complex)
        phi = phi / np.linalg.norm(phi)
        return max(0.0, self.best_value - float(np.real(np.vdot(phi, self.state @ phi))))


def gap_report(rho, actions, label=""):
    rho = np.asarray(rho)
    if isinstance(actions, DiscreteActions):
        if not actions.arms:
            raise ValueError("empty action set")
        means = np.array([expected_value(rho, a) for a in actions.arms])
        best = float(means.max())
        gaps = np.clip(best - means, 0.0, None)
        return GapReport(best, gaps, label, means, rho)
    if isinstance(actions, Rank1Actions):
        if rho.shape != (actions.dim, actions.dim):
            raise ValueError("dimension mismatch between state and action set")
        return GapReport(float(np.linalg.eigvalsh(rho)[-1]), None, label, None, rho)
    raise TypeError(f"unknown action set {actions!r}")


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class StepRecord:
    t: int
    action: object
    reward: float
    expected: float

    @property
    def residual(self):
        return self.reward - self.expected


@dataclass
class RunTrace:
    env: str
    policy: str
    seed: object
    actions: np.ndarray  # arm index, or index into ``arm_table`` for rank-1 sets
    rewards: np.ndarray
    expected: np.ndarray
    arm_table: Optional[list] = None
    flags: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.actions)

    @property
    def residuals(self):
        return self.rewards - self.expected

    def action(self, t):
        a = int(self.actions[t])
        return a if self.arm_table is None else self.arm_table[a]

    def action_id(self, t):
        a = int(self.actions[t])
        return str(a) if self.arm_table is None else arm_label(self.arm_table[a])

    @property
    def steps(self) -> Iterator[StepRecord]:
        for t in range(self.n):
            yield StepRecord(t + 1, self.action(t), float(self.rewards[t]), float(self.expected[t]))

    def pull_counts(self, k=None):
        return np.bincount(self.actions, minlength=k or 0)


def cumulative_regret(trace, report):
    """Pseudo-regret curve: entry ``t`` is the sum of gaps of the first ``t`` arms played."""
    if report.label and trace.env != report.label:
        raise ValueError(f"trace from {trace.env!r} does not match gap report for {report.label!r}")
    if (report.gaps is None) != (trace.arm_table is not None):
        raise ValueError("trace and gap report come from different kinds of action set")
    if report.gaps is not None:
        if len(trace.actions) and int(trace.actions.max()) >= len(report.gaps):
            raise ValueError(f"trace plays arm {int(trace.actions.max())} but the gap report has {len(report.gaps)}")
        inst = report.gaps[trace.actions]
    else:
        inst = report.best_value - trace.expected
        if np.any(inst < -1e-10):
            raise NumericalError("an arm beat the largest eigenvalue")
        inst = np.clip(inst, 0.0, None)
    return np.cumsum(inst)


STEP_COLUMNS = ("seed", "policy", "env", "t", "action_id", "reward", "expected", "instant_regret", "cum_regret")


def trace_rows(trace, report):
    curve = cumulative_regret(trace, report)
    prev = 0.0
    for t in range(trace.n):
        yield (trace.seed, trace.policy, trace.env, t + 1, trace.action_id(t),
               float(trace.rewards[t]), float(trace.expected[t]), float(curve[t] - prev), float(curve[t]))
        prev = curve[t]


# ---------------------------------------------------------------------------
# episodes


def seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


class _UniformStream:
    """Reward randomness: one U[0,1) stream consumed in chunks."""

    def __init__(self, rng, chunk=1 << 14):
        self.rng = rng
        self.chunk = chunk
        self._buf = np.empty(0)

    def take(self, m):
        if m <= len(self._buf):
            out, self._buf = self._buf[:m], self._buf[m:]
            return out
        out = np.concatenate([self._buf, self.rng.random(m - len(self._buf))])
        self._buf = np.empty(0)
        return out

    def unread(self, u):
        self._buf = np.concatenate([u, self._buf])


def run_episode(env, actions, policy, n, seed=0, label=None):
    """Play ``policy`` against ``env`` for ``n`` rounds.

    The policy only sees its own rng stream and the (arm, reward) history;
    rewards are drawn by inverse CDF from a separate stream, so a fixed seed
    reproduces the trace exactly. Once a learner reports a committed arm the
    remaining rounds are sampled in bulk from the same stream.
    """
    if n < 1:
        raise ValueError("horizon must be at least 1")
    if env.dim != actions.dim:
        raise ValueError(f"environment dim {env.dim} vs action set dim {actions.dim}")
    ss = seed_sequence(seed)
    reward_ss, policy_ss = ss.spawn(2)
    learner = policy.start(actions, n, np.random.default_rng(policy_ss))
    stream = _UniformStream(np.random.default_rng(reward_ss))
    if isinstance(actions, DiscreteActions):
        acts, rews, exp, table = _run_discrete(env.state, actions, learner, n, stream)
    else:
        acts, rews, exp, table = _run_rank1(env.state, learner, n, stream)
    if isinstance(seed, np.random.SeedSequence):
        seed = seed.entropy
    return RunTrace(label or env.label, policy.name, seed, acts, rews, exp, table,
                    dict(getattr(learner, "flags", {})))


def _stepper(n, stream, step, committed):
    """Call ``step(t, u)`` round by round; stop early once ``committed()`` fires."""
    t = 0
    while t < n:
        block = stream.take(min(stream.chunk, n - t))
        for i, u in enumerate(block.tolist()):
            step(t, u)
            t += 1
            if committed is not None and committed() is not None:
                stream.unread(block[i + 1:])
                return t
    return t


def _bulk(stream, count, chunk=1 << 20):
    while count > 0:
        m = min(chunk, count)
        yield stream.take(m)
        count -= m


def _run_discrete(rho, actions, learner, n, stream):
    k = actions.k
    dists = [reward_distribution(rho, a) for a in actions.arms]
    values = [[v for v, _ in d] for d in dists]
    cdfs = [_cdf(d) for d in dists]
    means = np.array([expected_value(rho, a) for a in actions.arms])
    select, update = learner.select, learner.update
    committed = getattr(learner, "committed_arm", None)
    acts = np.empty(n, dtype=np.int64)
    rews = np.empty(n)

    def step(t, u):
        a = select(t)
        if not 0 <= a < k:
            raise InvalidArmError(f"policy chose arm {a!r} outside 0..{k - 1}")
        x = values[a][bisect_right(cdfs[a], u)]
        update(a, x)
        acts[t] = a
        rews[t] = x

    t = _stepper(n, stream, step, committed)
    if t < n:
        a = int(committed())
        acts[t:] = a
        vals = np.asarray(values[a])
        for u in _bulk(stream, n - t):
            rews[t:t + len(u)] = vals[np.searchsorted(cdfs[a], u, side="right")]
            t += len(u)
    return acts, rews, means[acts], None


def _run_rank1(rho, learner, n, stream):
    select, update = learner.select, learner.update
    committed = getattr(learner, "committed_arm", None)
    table, index, probs = [], {}, []
    acts = np.empty(n, dtype=np.int64)
    rews = np.empty(n)

    def lookup(phi):
        phi = canonical_arm(phi)
        if phi.shape != (rho.shape[0],):
            raise InvalidArmError(f"arm vector of shape {phi.shape} for dimension {rho.shape[0]}")
        key = phi.tobytes()
        j = index.get(key)
        if j is None:
            j = index[key] = len(table)
            table.append(phi)
            probs.append(min(1.0, max(0.0, float(np.real(np.vdot(phi, rho @ phi))))))
        return j, phi

    def step(t, u):
        j, phi = lookup(select(t))
        x = 1.0 if u < probs[j] else 0.0
        update(phi, x)
        acts[t] = j
        rews[t] = x

    t = _stepper(n, stream, step, committed)
    if t < n:
        j, _ = lookup(committed())
        acts[t:] = j
        p = probs[j]
        for u in _bulk(stream, n - t):
            rews[t:t + len(u)] = u < p
            t += len(u)
    return acts, rews, np.asarray(probs)[acts], table
