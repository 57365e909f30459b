"""LinUCB over vectorized observables.

Arms ``O`` become real vectors ``A = vec(O)`` in an orthonormal Hermitian
basis, so ``Tr(rho O) = theta . A`` with ``theta = vec(rho)``. Selection uses
the index form ``theta_hat . A + sqrt(beta) ||A||_{V^-1}``, which equals the
maximum of ``theta . A`` over the confidence ellipsoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..bandit import DiscreteActions
from ..quantum import NumericalError, devectorize, orthonormal_hermitian_basis, vectorize
from .base import Policy

REINVERT_EVERY = 512
DRIFT_CHECK_EVERY = 64
DRIFT_TOL = 1e-6


class LinUcbState:
    """Ridge-regression state: ``V = lam I + sum A A^T``, ``b = sum A x``."""

    def __init__(self, p, lam=1.0, m=1.0, L=1.0, delta=0.01, noise_scale=1.0):
        if lam <= 0:
            raise ValueError("regularizer must be positive")
        if not 0 < delta <= 1:
            raise ValueError(f"confidence parameter must lie in (0, 1], got {delta!r}")
        self.p, self.lam, self.m, self.L = p, lam, m, L
        self.delta, self.noise_scale = delta, noise_scale
        self.V = lam * np.eye(p)
        self.Vinv = np.eye(p) / lam
        self.b = np.zeros(p)
        self.t = 0
        self.version = 0  # bumped on every full re-inversion

    @property
    def theta(self):
        return self.Vinv @ self.b

    def reinvert(self):
        try:
            self.Vinv = np.linalg.inv(self.V)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("design matrix is singular") from exc
        self.Vinv = 0.5 * (self.Vinv + self.Vinv.T)
        self.version += 1

    def drift(self):
        return float(np.max(np.abs(self.V @ self.Vinv - np.eye(self.p))))

    def update(self, A, x):
        """Rank-one update; returns ``(u, denom)`` with ``u = V^-1 A`` before the update."""
        if np.linalg.norm(A) > self.L + 1e-9:
            raise ValueError(f"arm vector norm {np.linalg.norm(A):.6g} exceeds L = {self.L:.6g}")
        u = self.Vinv @ A
        denom = 1.0 + A @ u
        self.V += np.outer(A, A)
        self.Vinv -= np.outer(u, u / denom)
        self.b += x * A
        self.t += 1
        if self.t % REINVERT_EVERY == 0:
            self.reinvert()
        elif self.t % DRIFT_CHECK_EVERY == 0 and self.drift() > DRIFT_TOL:
            self.reinvert()
        return u, denom


def ridge_update(state, A, x):
    state.update(np.asarray(A, dtype=float), float(x))
    return state


def confidence_radius(state, n):
    """``sqrt(beta) = sqrt(lam) m + R sqrt(2 log(1/delta) + p log((p lam + n L^2)/(p lam)))``."""
    if not 0 < state.delta <= 1:
        raise ValueError(f"confidence parameter must lie in (0, 1], got {state.delta!r}")
    p, lam = state.p, state.lam
    inner = 2.0 * math.log(1.0 / state.delta) + p * math.log((p * lam + n * state.L**2) / (p * lam))
    return math.sqrt(lam) * state.m + state.noise_scale * math.sqrt(inner)


def linucb_indices(state, X, sqrt_beta):
    """Optimistic index of every row of ``X``."""
    X = np.atleast_2d(X)
    norms = np.einsum("ij,jk,ik->i", X, state.Vinv, X)
    return X @ state.theta + sqrt_beta * np.sqrt(np.maximum(norms, 0.0))


def linucb_select_discrete(state, X, sqrt_beta):
    return int(np.argmax(linucb_indices(state, X, sqrt_beta)))


def _rank1_vectors(phis, basis):
    # vec(|phi><phi|)_i = <phi|sigma_i|phi>, batched over rows of phis
    return np.einsum("bi,kij,bj->bk", phis.conj(), basis.elements, phis).real


def _normalize(phis):
    return phis / np.linalg.norm(phis, axis=1, keepdims=True)


def linucb_select_continuous(state, d, rng, sqrt_beta, basis=None, restarts=16, steps=200,
                             step_size=0.1, return_value=False):
    """Best-effort argmax of the index over unit vectors in C^d.

    Batched projected gradient ascent from the top eigenvectors of
    ``+-sigma_i`` (non-identity basis elements), of ``devec(theta_hat)``, and
    random points, topped up to ``restarts`` starts. Each start keeps its own
    step size, halved whenever a step fails to improve. The result is never
    worse than any seed point.
    """
    basis = basis or orthonormal_hermitian_basis(d)
    E = basis.elements
    Theta = devectorize(state.theta, basis)
    seeds = []
    for s in E[1:]:
        w, U = np.linalg.eigh(s)
        seeds += [U[:, -1], U[:, 0]]
    seeds.append(np.linalg.eigh(Theta)[1][:, -1])
    extra = max(restarts - len(seeds), 0)
    if extra:
        z = rng.standard_normal((extra, d)) + 1j * rng.standard_normal((extra, d))
        seeds += list(z)
    phis = _normalize(np.array(seeds, dtype=complex))
    Vinv = state.Vinv

    def value(ph):
        v = _rank1_vectors(ph, basis)
        q = np.einsum("bi,ij,bj->b", v, Vinv, v)
        return v @ state.theta + sqrt_beta * np.sqrt(np.maximum(q, 0.0)), v, q

    f, v, q = value(phis)
    best_f, best_phi = f.copy(), phis.copy()
    eta = np.full(len(phis), step_size)
    for _ in range(steps):
        w = (v @ Vinv) * (sqrt_beta / np.sqrt(np.maximum(q, 1e-300)))[:, None]
        M = Theta[None] + np.einsum("bk,kij->bij", w, E)
        g = np.einsum("bij,bj->bi", M, phis)
        cand = _normalize(phis + eta[:, None] * g)
        f_new, v_new, q_new = value(cand)
        ok = f_new >= f - 1e-15
        phis = np.where(ok[:, None], cand, phis)
        f = np.where(ok, f_new, f)
        v = np.where(ok[:, None], v_new, v)
        q = np.where(ok, q_new, q)
        eta = np.where(ok, np.minimum(eta * 1.5, 10.0), eta * 0.5)
        better = f > best_f
        best_f = np.where(better, f, best_f)
        best_phi = np.where(better[:, None], phis, best_phi)
        if np.all(eta < 1e-10):
            break
    j = int(np.argmax(best_f))
    return (best_phi[j], float(best_f[j])) if return_value else best_phi[j]


class _DiscreteLearner:
    def __init__(self, state, X, sqrt_beta):
        self.state, self.X, self.sqrt_beta = state, X, sqrt_beta
        self._refresh()

    def _refresh(self):
        s = self.state
        self.norms = np.einsum("ij,jk,ik->i", self.X, s.Vinv, self.X)
        self._version = s.version

    def select(self, t):
        s = self.state
        idx = self.X @ (s.Vinv @ s.b) + self.sqrt_beta * np.sqrt(np.maximum(self.norms, 0.0))
        return int(idx.argmax())

    def update(self, arm, reward):
        u, denom = self.state.update(self.X[arm], reward)
        if self.state.version != self._version:
            self._refresh()
        else:
            xu = self.X @ u
            self.norms -= xu * xu / denom


class _Rank1Learner:
    def __init__(self, state, d, basis, sqrt_beta, rng, opts):
        self.state, self.d, self.basis = state, d, basis
        self.sqrt_beta, self.rng, self.opts = sqrt_beta, rng, opts

    def select(self, t):
        return linucb_select_continuous(self.state, self.d, self.rng, self.sqrt_beta,
                                        basis=self.basis, **self.opts)

    def update(self, phi, reward):
        v = _rank1_vectors(np.asarray(phi, dtype=complex)[None], self.basis)[0]
        self.state.update(v, reward)


@dataclass(frozen=True)
class LinUCB(Policy):
    """LinUCB with ``delta = 1/n`` and ``L = sqrt(d)`` by default.

    ``noise_scale`` multiplies the data-dependent part of the radius; it is 1
    for rewards that are 1-subgaussian and exists so rescaled problems can be
    matched exactly.
    """

    lam: float = 1.0
    m: float = 1.0
    L: Optional[float] = None
    delta: Optional[float] = None
    noise_scale: float = 1.0
    arm_scale: float = 1.0
    restarts: int = 16
    steps: int = 200
    step_size: float = 0.1
    name: str = "linucb"
    continuous = True

    def make_state(self, d, horizon):
        L = self.L if self.L is not None else math.sqrt(d)
        delta = self.delta if self.delta is not None else 1.0 / max(horizon, 2)
        return LinUcbState(d * d, self.lam, self.m, L, delta, self.noise_scale)

    def start(self, actions, horizon, rng):
        self.check(actions)
        d = actions.dim
        state = self.make_state(d, horizon)
        sqrt_beta = confidence_radius(state, horizon)
        basis = orthonormal_hermitian_basis(d)
        if isinstance(actions, DiscreteActions):
            X = self.arm_scale * np.array([vectorize(a.op, basis) for a in actions.arms])
            return _DiscreteLearner(state, X, sqrt_beta)
        opts = dict(restarts=self.restarts, steps=self.steps, step_size=self.step_size)
        return _Rank1Learner(state, d, basis, sqrt_beta, rng, opts)
