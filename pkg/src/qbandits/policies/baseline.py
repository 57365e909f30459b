"""Non-learning reference policies: uniform, fixed arm, and a two-phase rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import TabulatedPolicy


@dataclass(frozen=True)
class UniformPolicy(TabulatedPolicy):
    name: str = "uniform"

    def action_probs(self, history, k):
        return np.full(k, 1.0 / k)

    def start(self, actions, horizon, rng):
        self.check(actions)
        return _PrecomputedLearner(rng.integers(0, actions.k, size=horizon).tolist())


class _PrecomputedLearner:
    def __init__(self, arms):
        self.arms = arms

    def select(self, t):
        return self.arms[t]

    def update(self, arm, reward):
        pass


@dataclass(frozen=True)
class FixedArmPolicy(TabulatedPolicy):
    """Always plays ``arm``; with the best arm this is the (cheating) oracle."""

    arm: int = 0
    name: str = "fixed"

    def action_probs(self, history, k):
        p = np.zeros(k)
        p[self.arm] = 1.0
        return p

    def start(self, actions, horizon, rng):
        self.check(actions)
        if not 0 <= self.arm < actions.k:
            raise ValueError(f"arm {self.arm} not in action set of size {actions.k}")
        return _PrecomputedLearner([self.arm] * horizon)


@dataclass(frozen=True)
class TwoPhasePolicy(TabulatedPolicy):
    """Uniform for the first ``switch`` rounds, then greedy on phase-one means.

    Phase two is deterministic: the arm with the highest empirical mean among
    arms pulled in phase one, ties to the lowest index.
    """

    switch: int = 1
    name: str = "two_phase"

    def action_probs(self, history, k):
        if len(history) < self.switch:
            return np.full(k, 1.0 / k)
        sums, counts = np.zeros(k), np.zeros(k)
        for a, x in history[: self.switch]:
            sums[a] += x
            counts[a] += 1
        means = np.where(counts > 0, sums / np.maximum(counts, 1), -np.inf)
        p = np.zeros(k)
        p[int(np.argmax(means))] = 1.0
        return p
