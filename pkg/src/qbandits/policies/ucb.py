"""UCB for discrete arms with 1-subgaussian rewards."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .base import Policy


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"confidence parameter must lie in (0, 1), got {delta!r}")


class UcbState:
    """Pull counts, running means and cached indices for ``k`` arms."""

    def __init__(self, k, delta):
        _check_delta(delta)
        self.k = k
        self.delta = delta
        self.counts = [0] * k
        self.means = [0.0] * k
        self._c2 = 2.0 * math.log(1.0 / delta)
        self._index = [math.inf] * k

    def select(self, t):
        idx = self._index
        return idx.index(max(idx))

    def update(self, arm, reward):
        c = self.counts[arm] + 1
        self.counts[arm] = c
        m = self.means[arm] + (reward - self.means[arm]) / c
        self.means[arm] = m
        self._index[arm] = m + math.sqrt(self._c2 / c)


def ucb_index(state, arm, t=None):
    """Optimistic index of ``arm``: ``inf`` until played, then mean plus bonus."""
    _check_delta(state.delta)
    if not 0 <= arm < state.k:
        raise IndexError(arm)
    T = state.counts[arm]
    if T == 0:
        return math.inf
    return state.means[arm] + math.sqrt(2.0 * math.log(1.0 / state.delta) / T)


@dataclass(frozen=True)
class UCB(Policy):
    """``delta`` defaults to ``1/n**2`` for horizon ``n``."""

    delta: Optional[float] = None
    name: str = "ucb"

    def start(self, actions, horizon, rng):
        self.check(actions)
        delta = self.delta if self.delta is not None else 1.0 / max(horizon, 2) ** 2
        return UcbState(actions.k, delta)
