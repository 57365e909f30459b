"""Phased elimination with G-optimal exploration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..quantum import orthonormal_hermitian_basis, vectorize
from .base import Policy
from .design import g_optimal_design, span_coordinates


def phase_budget(p, weight, eps, k, phase, delta):
    """``ceil(2 p pi(a) / eps^2 * log(k l (l+1) / delta))``."""
    if weight <= 0:
        return 0
    return math.ceil(2.0 * p * weight / eps**2 * math.log(k * phase * (phase + 1) / delta))


class PhasedElimState:
    """Per-episode state. Plays inside a phase are interleaved round-robin."""

    def __init__(self, X, delta, eps_fw=1e-2, dimension="span"):
        self.X = X
        self.k = len(X)
        self.delta = delta
        self.eps_fw = eps_fw
        self.dimension = dimension
        self.active = list(range(self.k))
        self.phase = 0
        self.history = []  # active sets, one per started phase
        self._start_phase()

    @property
    def eps(self):
        return 2.0 ** -self.phase

    def _start_phase(self):
        self.phase += 1
        self.history.append(tuple(self.active))
        Xa = self.X[self.active]
        self.Y = span_coordinates(Xa)
        self.design = g_optimal_design(self.Y, self.eps_fw)
        p = self.design.span_dim if self.dimension == "span" else self.X.shape[1]
        self.budgets = [phase_budget(p, w, self.eps, self.k, self.phase, self.delta)
                        for w in self.design.weights]
        self.remaining = list(self.budgets)
        self.sums = [0.0] * len(self.active)
        self._order = [i for i, b in enumerate(self.budgets) if b > 0]
        self._cursor = 0
        self._left = sum(self.budgets)

    def select(self, t):
        order, rem = self._order, self.remaining
        while True:
            i = order[self._cursor % len(order)]
            self._cursor += 1
            if rem[i] > 0:
                self._current = i
                return self.active[i]

    def committed_arm(self):
        return self.active[0] if len(self.active) == 1 else None

    def update(self, arm, reward):
        i = self._current
        self.remaining[i] -= 1
        self.sums[i] += reward
        self._left -= 1
        if self._left == 0:
            self._finish_phase()

    def estimates(self):
        """Phase-local least-squares values ``theta_hat . a`` for the active arms."""
        Y = self.Y
        T = np.asarray(self.budgets, dtype=float)
        V = (Y * T[:, None]).T @ Y
        theta = np.linalg.solve(V, Y.T @ np.asarray(self.sums))
        return Y @ theta

    def _finish_phase(self):
        est = self.estimates()
        keep = [a for a, e in zip(self.active, est) if est.max() - e <= 2.0 * self.eps]
        self.active = keep or [self.active[int(np.argmax(est))]]
        self._start_phase()


@dataclass(frozen=True)
class PhasedElimination(Policy):
    """``delta`` defaults to ``1/n``; ``dimension`` is ``"span"`` or ``"ambient"``.

    The dimension setting only changes the ``p`` in the phase budgets. The
    design and estimates always live in the span of the active arms.
    """

    delta: float | None = None
    eps_fw: float = 1e-2
    dimension: str = "span"
    name: str = "phased_elim"

    def start(self, actions, horizon, rng):
        self.check(actions)
        if self.dimension not in ("span", "ambient"):
            raise ValueError(f"unknown dimension mode {self.dimension!r}")
        basis = orthonormal_hermitian_basis(actions.dim)
        X = np.array([vectorize(a.op, basis) for a in actions.arms])
        delta = self.delta if self.delta is not None else 1.0 / max(horizon, 2)
        return PhasedElimState(X, delta, self.eps_fw, self.dimension)
