"""Projected least-squares (PLS) tomography from Pauli measurements."""

from __future__ import annotations

import math

import numpy as np

from ..quantum import hermitian, pauli_strings, trace_norm


class InfeasibleProjectionError(ValueError):
    """No pure state lies within the requested trace-norm ball."""

    def __init__(self, msg, vector=None, distance=None):
        super().__init__(msg)
        self.vector = vector
        self.distance = distance


def n_qubits(d):
    m = int(round(math.log2(d)))
    if d < 2 or 2**m != d:
        raise ValueError(f"Pauli tomography needs a power-of-two dimension, got {d}")
    return m


def pauli_means_estimator(means, d):
    """``L = I/d + (1/d) sum_i m_i sigma_i`` over the non-identity Pauli strings."""
    means = np.asarray(means, dtype=float)
    paulis = pauli_strings(n_qubits(d))
    if means.shape != (len(paulis),):
        raise ValueError(f"expected {len(paulis)} Pauli means, got shape {means.shape}")
    L = np.eye(d, dtype=complex) / d
    for m, P in zip(means, paulis):
        L += (m / d) * P.op
    return hermitian(L)


def pls_linear_estimator(n_plus, n_minus, trials, d):
    """Least-squares estimate from ``n_plus``/``n_minus`` outcome counts per Pauli."""
    n_plus, n_minus, trials = (np.asarray(a, dtype=float) for a in (n_plus, n_minus, trials))
    if np.any(trials <= 0):
        raise ValueError("every measured Pauli needs at least one trial")
    if np.any(n_plus < 0) or np.any(n_minus < 0) or not np.array_equal(n_plus + n_minus, trials):
        raise ValueError("outcome counts are inconsistent with the number of trials")
    return pauli_means_estimator((n_plus - n_minus) / trials, d)


def project_to_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def project_to_density(L):
    """Frobenius-nearest density matrix: simplex-project the spectrum of ``L``."""
    w, U = np.linalg.eigh(hermitian(L))
    p = project_to_simplex(w)
    return hermitian((U * p) @ U.conj().T)


def top_eigenvector(rho, tol=1e-12):
    """Leading eigenvector; ties go to the lowest eigh index."""
    w, U = np.linalg.eigh(hermitian(rho))
    j = int(np.flatnonzero(w >= w[-1] - tol)[0])
    return U[:, j]


def project_to_pure(rho_hat, eps):
    """Rank-one projector on the top eigenvector, if it is within ``eps`` in trace norm."""
    if not 0 <= eps <= 2:
        raise ValueError(f"tolerance must lie in [0, 2], got {eps!r}")
    psi = top_eigenvector(rho_hat)
    P = np.outer(psi, psi.conj())
    dist = trace_norm(np.asarray(rho_hat) - P)
    if dist > eps + 1e-12:
        raise InfeasibleProjectionError(
            f"nearest pure state is at trace distance {dist:.6g} > {eps:.6g}", psi, dist)
    return P


def pls_tolerance(n, d):
    """``eps`` with ``eps^2 = 43 d^2 log(n) / sqrt(n)``."""
    return math.sqrt(43.0 * d * d * math.log(n) / math.sqrt(n))


def simulate_pls(rho, samples, rng):
    """PLS estimate of a qubit-register state from ``samples`` Pauli measurements.

    Samples are split evenly over the non-identity Pauli strings, remainders to
    lower indices; outcome counts are drawn binomially from the exact Born
    probabilities.
    """
    d = rho.shape[0]
    paulis = pauli_strings(n_qubits(d))
    q = len(paulis)
    trials = np.full(q, samples // q)
    trials[: samples % q] += 1
    p_plus = np.array([np.real(np.trace(rho @ (np.eye(d) + P.op))) / 2 for P in paulis])
    n_plus = rng.binomial(trials, np.clip(p_plus, 0.0, 1.0))
    L = pls_linear_estimator(n_plus, trials - n_plus, trials, d)
    return project_to_density(L)
