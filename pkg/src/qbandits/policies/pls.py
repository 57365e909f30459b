"""Bandit PLS: Pauli tomography for ceil(sqrt(n)) rounds, then commit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bandit import IncompatibleActionSetError
from ..quantum import pauli_strings
from .base import Policy
from .tomography import (InfeasibleProjectionError, n_qubits, pauli_means_estimator,
                         pls_linear_estimator, pls_tolerance, project_to_density,
                         project_to_pure, top_eigenvector)


def ceil_sqrt(n):
    s = math.isqrt(n)
    return s if s * s == n else s + 1


def exploration_arms(d):
    """Rank-one exploration arms as ``(pauli index, vector, sign)``.

    For a qubit only the +1 eigenvector of each Pauli is played and the -1
    count is ``trials - hits``. For larger registers every eigenvector of
    every Pauli string is played.
    """
    arms = []
    for i, P in enumerate(pauli_strings(n_qubits(d))):
        w, U = np.linalg.eigh(P.op)
        if d == 2:
            arms.append((i, U[:, -1], 1.0))
        else:
            arms += [(i, U[:, j], float(np.sign(w[j]))) for j in range(d)]
    return arms


class PlsState:
    def __init__(self, horizon, d):
        self.horizon, self.d = horizon, d
        self.explore = ceil_sqrt(horizon)
        self.arms = exploration_arms(d)
        if self.explore < len(self.arms):
            raise ValueError(f"horizon {horizon} too short: ceil(sqrt(n)) = {self.explore} "
                             f"< {len(self.arms)} exploration arms")
        self.hits = np.zeros(len(self.arms))
        self.trials = np.zeros(len(self.arms), dtype=np.int64)
        self.t = 0
        self.rho_hat = None
        self.psi = None
        self.flags = {"explore_rounds": self.explore, "pls_infeasible": False}

    def select(self, t):
        if self.psi is not None:
            return self.psi
        return self.arms[self.t % len(self.arms)][1]

    def committed_arm(self):
        return self.psi

    def update(self, phi, reward):
        if self.psi is not None:
            return
        j = self.t % len(self.arms)
        self.hits[j] += reward
        self.trials[j] += 1
        self.t += 1
        if self.t == self.explore:
            self._commit()

    def estimate(self):
        if self.d == 2:
            n_plus = self.hits
            return pls_linear_estimator(n_plus, self.trials - n_plus, self.trials, 2)
        q = len(self.arms) // self.d
        means = np.zeros(q)
        for (i, _, s), h, T in zip(self.arms, self.hits, self.trials):
            means[i] += s * h / T
        return pauli_means_estimator(means, self.d)

    def _commit(self):
        self.rho_hat = project_to_density(self.estimate())
        eps = min(pls_tolerance(self.horizon, self.d), 2.0)
        try:
            P = project_to_pure(self.rho_hat, eps)
            self.psi = top_eigenvector(P)
        except InfeasibleProjectionError as exc:
            self.psi = exc.vector
            self.flags["pls_infeasible"] = True


@dataclass(frozen=True)
class BanditPLS(Policy):
    """Explore-then-commit on all rank-one projectors. Qubits only unless ``allow_large``."""

    allow_large: bool = False
    name: str = "bandit_pls"
    discrete = False
    continuous = True

    def start(self, actions, horizon, rng):
        self.check(actions)
        if actions.dim != 2 and not self.allow_large:
            raise IncompatibleActionSetError(
                "Bandit PLS is analysed for qubits; pass allow_large=True for larger registers")
        return PlsState(horizon, actions.dim)
