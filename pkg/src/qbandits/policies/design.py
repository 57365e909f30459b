"""G-optimal experimental design by Frank-Wolfe (Fedorov-Wynn) iterations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRUNE_TOL = 1e-9


@dataclass(frozen=True)
class DesignResult:
    weights: np.ndarray  # one weight per input vector, zero off the support
    support: tuple
    logdet: float
    g: float  # max leverage, equals span_dim at the optimum
    span_dim: int
    iterations: int

    @property
    def support_weights(self):
        return self.weights[list(self.support)]


def span_coordinates(vectors, rtol=1e-10):
    """Coordinates of the rows of ``vectors`` in an orthonormal basis of their span."""
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    if X.size == 0:
        raise ValueError("design needs at least one vector")
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0:
        raise ValueError("all design vectors are zero")
    r = int(np.sum(s > rtol * s[0]))
    return X @ Vt[:r].T


def leverages(Y, w):
    M = (Y * w[:, None]).T @ Y
    Minv = np.linalg.inv(M)
    return np.einsum("ij,jk,ik->i", Y, Minv, Y), M


def _caratheodory(Y, w, max_support):
    """Shrink the support to ``max_support`` points without changing ``sum w y y^T``."""
    p = Y.shape[1]
    iu = np.triu_indices(p)
    w = w.copy()
    while np.count_nonzero(w) > max_support:
        S = np.flatnonzero(w)
        F = np.einsum("si,sj->sij", Y[S], Y[S])[:, iu[0], iu[1]]  # |S| x p(p+1)/2
        # a null direction exists because |S| exceeds the number of rows
        c = np.linalg.svd(F.T)[2][-1]
        # the diagonal rows force sum c_s |y_s|^2 = 0, so c has both signs;
        # taking sum(c) >= 0 means renormalizing only inflates V(pi)
        if c.sum() < 0:
            c = -c
        pos = c > 1e-15
        ratios = w[S][pos] / c[pos]
        step = ratios.min()
        w[S] = w[S] - step * c
        w[S[pos][np.argmin(ratios)]] = 0.0
        w[np.abs(w) < 1e-15] = 0.0
        w = np.maximum(w, 0.0)
        w /= w.sum()
    return w


def g_optimal_design(vectors, eps_fw=1e-2, max_iter=100_000, line_search=False):
    """Approximate G-optimal design over the rows of ``vectors``.

    Works in span coordinates so that ``V(pi)`` is invertible. Starts from the
    uniform design and moves toward the arm of highest leverage until the
    Kiefer-Wolfowitz certificate ``g <= p' (1 + eps_fw)`` holds. With
    ``line_search`` the step is the exact log-det maximizer
    ``(g/p' - 1)/(g - 1)``; otherwise ``1/(t + p')``. Tiny weights are pruned
    and the support is reduced to at most ``p'(p'+1)/2`` points.
    """
    Y = span_coordinates(vectors)
    k, p = Y.shape
    w = np.full(k, 1.0 / k)
    it = 0
    lev, _ = leverages(Y, w)
    while True:
        j = int(np.argmax(lev))
        g = lev[j]
        if g <= p * (1 + eps_fw) or it >= max_iter:
            break
        gamma = (g / p - 1.0) / (g - 1.0) if line_search else 1.0 / (it + 1 + p)
        w *= 1.0 - gamma
        w[j] += gamma
        it += 1
        lev, _ = leverages(Y, w)
    w[w < PRUNE_TOL] = 0.0
    w /= w.sum()
    max_support = p * (p + 1) // 2
    if np.count_nonzero(w) > max_support:
        w = _caratheodory(Y, w, max_support)
    lev, M = leverages(Y, w)
    sign, logdet = np.linalg.slogdet(M)
    support = tuple(int(i) for i in np.flatnonzero(w))
    return DesignResult(w, support, float(logdet), float(lev.max()), p, it)
