"""Exact audits of the information inequalities behind the lower bounds.

Trajectory laws ``P_{rho,pi}`` over ``(a_1, x_1, ..., a_n, x_n)`` are
enumerated exhaustively, which is feasible for a handful of arms and rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bandit import reward_distribution
from .quantum import relative_entropy, renyi_half

ENUMERATION_CAP = 10**6
AUDIT_COLUMNS = ("lemma", "params", "lhs", "rhs", "gap", "pass")


class EnumerationCapError(ValueError):
    pass


def kl(p, q):
    """Classical KL divergence with ``0 log 0 = 0`` and ``inf`` off support."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    m = p > 0
    if np.any(q[m] <= 0):
        return math.inf
    with np.errstate(over="ignore"):
        return float(np.sum(p[m] * np.log(p[m] / q[m])))


def bhattacharyya(p, q):
    """Squared Bhattacharyya coefficient ``(sum sqrt(p q))^2``."""
    return float(np.sum(np.sqrt(np.asarray(p, float) * np.asarray(q, float)))) ** 2


def _outcome_table(rho, rho_p, arms):
    """Per arm: outcome values with their probabilities under both states."""
    table = []
    for O in arms:
        d1 = dict(reward_distribution(rho, O))
        d2 = dict(reward_distribution(rho_p, O))
        vals = sorted(set(d1) | set(d2), reverse=True)
        table.append((vals, np.array([d1.get(v, 0.0) for v in vals]),
                      np.array([d2.get(v, 0.0) for v in vals])))
    return table


@dataclass(frozen=True)
class Enumeration:
    kl: float  # D(P_rho || P_rho')
    bhattacharyya: float  # F(P_rho, P_rho')
    pulls: np.ndarray  # E_rho[T_a(n)]
    pulls_prime: np.ndarray  # E_rho'[T_a(n)]
    sequences: int


def enumerate_trajectories(rho, rho_p, arms, policy, n):
    """Exact divergences between the two trajectory laws of ``policy``.

    ``policy.action_probs(history, k)`` must give the exact conditional law of
    the next arm. Policy factors are identical under both states, so only
    reward likelihoods enter the log ratio.
    """
    arms = list(getattr(arms, "arms", arms))
    k = len(arms)
    table = _outcome_table(rho, rho_p, arms)
    width = k * max(len(t[0]) for t in table)
    if width**n > ENUMERATION_CAP:
        raise EnumerationCapError(f"(k|X|)^n = {width}^{n} exceeds {ENUMERATION_CAP}")
    acc = dict(kl=0.0, bc=0.0, leaves=0)
    pulls, pulls_p = np.zeros(k), np.zeros(k)

    def walk(history, P, Q, logr, counts):
        if len(history) == n:
            if P > 0:
                acc["kl"] += P * logr
            acc["bc"] += math.sqrt(P * Q)
            acc["leaves"] += 1
            pulls[:] += P * counts
            pulls_p[:] += Q * counts
            return
        probs = policy.action_probs(history, k)
        for a in range(k):
            pa = float(probs[a])
            if pa == 0:
                continue
            vals, p1, p2 = table[a]
            counts[a] += 1
            for v, x1, x2 in zip(vals, p1, p2):
                if x1 == 0 and x2 == 0:
                    continue
                step = logr
                if x1 > 0:
                    step = logr + (math.log(x1 / x2) if x2 > 0 else math.inf)
                history.append((a, v))
                walk(history, P * pa * x1, Q * pa * x2, step, counts)
                history.pop()
            counts[a] -= 1

    walk([], 1.0, 1.0, 0.0, np.zeros(k))
    return Enumeration(acc["kl"], acc["bc"] ** 2, pulls, pulls_p, acc["leaves"])


@dataclass(frozen=True)
class DivergenceAudit:
    lhs: float
    rhs: float
    per_arm_kl: np.ndarray
    pulls: np.ndarray
    gap: float

    def passed(self, tol=1e-9):
        return self.gap <= tol


def per_arm_kl(rho, rho_p, arms):
    return np.array([kl(p1, p2) for _, p1, p2 in _outcome_table(rho, rho_p, list(getattr(arms, "arms", arms)))])


def divergence_audit(pair, policy, n, arms):
    """Both sides of the divergence decomposition, by exact enumeration."""
    rho, rho_p = pair.rho, pair.rho_prime
    e = enumerate_trajectories(rho, rho_p, arms, policy, n)
    kls = per_arm_kl(rho, rho_p, arms)
    used = e.pulls > 0
    rhs = float(np.sum(e.pulls[used] * kls[used]))
    if math.isfinite(rhs) and math.isfinite(e.kl):
        gap = abs(e.kl - rhs)
    else:
        gap = 0.0 if e.kl == rhs else math.inf
    return DivergenceAudit(e.kl, rhs, kls, e.pulls, gap)


@dataclass(frozen=True)
class ProcessingAudit:
    kl_lhs: float
    kl_rhs: float
    half_lhs: float
    half_rhs: float

    @property
    def kl_slack(self):
        return self.kl_rhs - self.kl_lhs

    @property
    def half_slack(self):
        return self.half_rhs - self.half_lhs

    def passed(self, tol=1e-9):
        return self.kl_slack >= -tol and self.half_slack >= -tol


def data_processing_audit(pair, policy, n, arms):
    """``D_alpha(P_rho || P_rho') <= n D_alpha(rho || rho')`` for alpha in {1, 1/2}."""
    e = enumerate_trajectories(pair.rho, pair.rho_prime, arms, policy, n)
    half = -math.log(e.bhattacharyya) if e.bhattacharyya > 0 else math.inf
    return ProcessingAudit(e.kl, n * relative_entropy(pair.rho, pair.rho_prime),
                           half, n * renyi_half(pair.rho, pair.rho_prime))


def bretagnolle_huber_audit(P, Q, event):
    """``(P(A) + Q(A^c), 1/2 exp(-D(P||Q)), 1/2 F(P, Q))`` for the event mask ``A``."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    ev = np.asarray(event)
    A = ev.copy() if ev.dtype == bool else np.isin(np.arange(len(P)), ev)
    lhs = float(P[A].sum() + Q[~A].sum())
    D = kl(P, Q)
    rhs1 = 0.5 * math.exp(-D) if math.isfinite(D) else 0.0
    rhs2 = 0.5 * bhattacharyya(P, Q)
    return lhs, rhs1, rhs2


def least_pulled(pulls, exclude=0):
    """``argmin_{j != exclude} pulls[j]``, ties to the lowest index."""
    best, arg = math.inf, None
    for j, v in enumerate(pulls):
        if j != exclude and v < best - 1e-12:
            best, arg = v, j
    return arg


def audit_row(lemma, params, lhs, rhs, gap, passed):
    return dict(lemma=lemma, params=params, lhs=lhs, rhs=rhs, gap=gap, passed=bool(passed))
