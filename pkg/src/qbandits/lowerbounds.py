"""Hard environment pairs behind the minimax lower bounds, and their constants.

Each constructor returns an :class:`EnvironmentPair` whose two states are
hard to tell apart yet disagree about the best arm. :func:`bound_rhs`
evaluates the matching regret floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quantum import (density_matrix, pauli_strings, purified_distance,
                      relative_entropy, state_to_bloch)

PAULI_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class ConstructionError(ValueError):
    """The action set or parameters do not admit the requested construction."""


@dataclass(frozen=True)
class EnvironmentPair:
    rho: np.ndarray
    rho_prime: np.ndarray
    theorem: str
    delta: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    params: dict
    rhs: float
    constants: dict = field(default_factory=dict)


def _check_delta(delta, hi, lo=0.0):
    if not lo <= delta <= hi:
        raise ConstructionError(f"delta = {delta!r} outside [{lo}, {hi}]")


def _arms(actions):
    return list(getattr(actions, "arms", actions))


def _bloch_state(r, delta):
    return 0.5 * np.eye(2, dtype=complex) + 0.5 * delta * sum(x * s for x, s in zip(r, PAULI_SIGMA))


# -- general action sets -----------------------------------------------------

def dominance_margins(actions):
    """Per arm ``a``: ``<psi_a|O_a|psi_a> - max_{i != a} <psi_a|O_i|psi_a>``."""
    arms = _arms(actions)
    out = []
    for a, O in enumerate(arms):
        psi = O.top_eigenvector()
        vals = [float(np.real(np.vdot(psi, B.op @ psi))) for B in arms]
        others = [v for i, v in enumerate(vals) if i != a]
        out.append(vals[a] - max(others) if others else -math.inf)
    return out


def check_no_dominance(actions, tol=1e-12):
    """Lowest-index pair ``(a, b, c)`` whose top eigenvectors strictly prefer their own arm.

    ``c`` is the smaller of the two margins.
    """
    margins = dominance_margins(actions)
    good = [a for a, m in enumerate(margins) if m > tol]
    if len(good) < 2:
        raise ConstructionError("action set has a dominant arm or fewer than two arms")
    a, b = good[:2]
    return a, b, min(margins[a], margins[b])


def _mixed_with(psi, delta):
    d = len(psi)
    return (1 - delta) / d * np.eye(d, dtype=complex) + delta * np.outer(psi, psi.conj())


def make_general_pair(actions, delta):
    """``rho = (1-D)/d I + D |psi_A><psi_A|`` and the same with ``psi_B``."""
    _check_delta(delta, 0.5)
    a, b, c = check_no_dominance(actions)
    arms = _arms(actions)
    psi_a, psi_b = arms[a].top_eigenvector(), arms[b].top_eigenvector()
    traceless = all(abs(np.trace(O.op)) < 1e-10 for O in arms)
    return EnvironmentPair(
        density_matrix(_mixed_with(psi_a, delta)), density_matrix(_mixed_with(psi_b, delta)),
        "thm1", delta,
        dict(a=a, b=b, c=c, psi_a=psi_a, psi_b=psi_b, traceless=traceless))


# -- one qubit, rank-one projector arms ----------------------------------------

def _projector_bloch(O):
    P = O.op
    if O.dim != 2 or not np.allclose(P @ P, P, atol=1e-9) or abs(np.trace(P) - 1) > 1e-9:
        raise ConstructionError(f"arm {O.label!r} is not a rank-one qubit projector")
    return state_to_bloch(P)


def rotate_to_orthogonal(ra, rb):
    """Rotate ``ra``, ``rb`` symmetrically in their plane until they are orthogonal.

    With bisector ``b`` and in-plane normal ``w`` (from ``rb`` towards ``ra``)
    the results are ``(b + w)/sqrt2`` and ``(b - w)/sqrt2``. Antiparallel input
    takes as bisector the first coordinate axis not parallel to ``ra``.
    """
    ra, rb = np.asarray(ra, float), np.asarray(rb, float)
    s = ra + rb
    if np.linalg.norm(s) < 1e-12:
        for e in np.eye(3):
            b = e - (e @ ra) * ra
            if np.linalg.norm(b) > 1e-6:
                break
        w = ra
    else:
        b = s
        w = ra - rb
    b = b / np.linalg.norm(b)
    w = w / np.linalg.norm(w)
    return (b + w) / math.sqrt(2), (b - w) / math.sqrt(2)


def constant_p(c):
    """``p = (sqrt(c) + sqrt(1 - c)) / sqrt2`` with ``c = Tr(Pi_a Pi_b)``."""
    return (math.sqrt(c) + math.sqrt(1 - c)) / math.sqrt(2)


def make_qubit_rank1_pair(actions, delta):
    _check_delta(delta, 0.5)
    R = [_projector_bloch(O) for O in _arms(actions)]
    if len(R) < 2:
        raise ConstructionError("need at least two arms")
    best, pair = math.inf, None
    for i in range(len(R)):
        for j in range(i + 1, len(R)):
            dot = abs(float(R[i] @ R[j]))
            if dot < 1 - 1e-12 and dot < best - 1e-12:
                best, pair = dot, (i, j)
    if pair is None:
        raise ConstructionError("all arm directions are collinear")
    a, b = pair
    ra, rb = R[a], R[b]
    ra2, rb2 = rotate_to_orthogonal(ra, rb)
    c = (1 + float(ra @ rb)) / 2
    closest = all(float(ra2 @ r) <= float(ra2 @ ra) + 1e-12 and float(rb2 @ r) <= float(rb2 @ rb) + 1e-12
                  for r in R)
    return EnvironmentPair(
        density_matrix(_bloch_state(ra2, delta)), density_matrix(_bloch_state(rb2, delta)),
        "thm2", delta,
        dict(a=a, b=b, r_a=ra, r_b=rb, r_a_rot=ra2, r_b_rot=rb2, c=c, p=constant_p(c),
             closest=closest))


def lemma5_pair(delta):
    """Orthogonal Bloch pair ``I/2 + D/2 sigma_x`` and ``I/2 + D/2 sigma_z``."""
    return _bloch_state((1, 0, 0), delta), _bloch_state((0, 0, 1), delta)


def lemma5_closed_form(delta):
    return delta / 2 * math.log((1 + delta) / (1 - delta))


# -- Pauli strings ---------------------------------------------------------------

def _pauli_index(O):
    d = O.dim
    m = int(round(math.log2(d)))
    if 2**m != d:
        raise ConstructionError(f"dimension {d} is not a power of two")
    for P in pauli_strings(m):
        if np.allclose(O.op, P.op, atol=1e-12):
            return P.label
    raise ConstructionError(f"arm {O.label!r} is not a non-identity Pauli string")


def make_pauli_pair(actions, delta, l, first=0):
    """``rho = I/d + D/d s_1`` and ``rho' = rho + 2D/d s_l``."""
    _check_delta(delta, 1 / 3)
    arms = _arms(actions)
    labels = [_pauli_index(O) for O in arms]
    if len(set(labels)) != len(labels):
        raise ConstructionError("Pauli arms must be distinct")
    if not 0 <= l < len(arms) or l == first:
        raise ConstructionError(f"l = {l} must be a valid arm other than {first}")
    d = arms[0].dim
    rho = np.eye(d, dtype=complex) / d + delta / d * arms[first].op
    rho_p = rho + 2 * delta / d * arms[l].op
    return EnvironmentPair(density_matrix(rho), density_matrix(rho_p), "thm3", delta,
                           dict(l=l, first=first, labels=labels))


def pauli_arm_kl(delta):
    """KL between the reward laws of arm ``l`` under the two states."""
    return 0.5 * math.log(1 / (1 - 4 * delta**2))


def thm3_delta(n, k):
    return 0.5 * math.sqrt(1 - math.exp(-(k - 1) / n))


# -- pure qubit environments -------------------------------------------------------

def pure_pair_vectors(delta):
    _check_delta(delta, 1.0)
    out = []
    for s in (1, -1):
        x = (1 + s * delta) / math.sqrt(2)
        v = np.array([1 + x, x], dtype=complex)
        out.append(v / math.sqrt((1 + x) ** 2 + x**2))
    return out


def make_pure_qubit_pair(delta):
    psi_p, psi_m = pure_pair_vectors(delta)
    overlap = complex(np.vdot(psi_p, psi_m))
    return EnvironmentPair(
        density_matrix(np.outer(psi_p, psi_p.conj())), density_matrix(np.outer(psi_m, psi_m.conj())),
        "thm4", delta,
        dict(psi_plus=psi_p, psi_minus=psi_m, overlap=overlap,
             displayed_overlap=2 + math.sqrt(2) - delta**2))


def pure_gap_floor(delta):
    return 3 * delta / (5 + 2 * math.sqrt(2))


# -- all rank-one projectors --------------------------------------------------------

def uniform_superposition(d):
    return np.ones(d, dtype=complex) / math.sqrt(d)


def make_allpure_pair(d, delta):
    """``rho`` peaked on ``|0>``, ``rho'`` peaked on the uniform superposition."""
    if d < 2:
        raise ConstructionError("dimension must be at least 2")
    _check_delta(delta, 0.5)
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1
    psi = uniform_superposition(d)
    return EnvironmentPair(density_matrix(_mixed_with(e0, delta)), density_matrix(_mixed_with(psi, delta)),
                           "thm5", delta, dict(d=d, psi=psi))


def allpure_geometry(d, etas):
    """Check the separation used in the all-rank-one bound on sample vectors ``etas``.

    The neighbourhoods are ``N1 = {eta : |<0|eta>|^2 > 3/4 + 1/(4d)}`` and
    ``N2`` likewise around the uniform superposition.
    """
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1
    psi = uniform_superposition(d)
    P = purified_distance(np.outer(e0, e0.conj()), np.outer(psi, psi.conj()))
    thr = 0.75 + 0.25 / d
    etas = np.atleast_2d(np.asarray(etas, dtype=complex))
    etas = etas / np.linalg.norm(etas, axis=1, keepdims=True)
    in1 = np.abs(etas[:, 0]) ** 2 > thr
    in2 = np.abs(etas @ psi.conj()) ** 2 > thr
    return dict(purified_distance=P, expected=math.sqrt(1 - 1 / d), n_in_N1=int(in1.sum()),
                n_in_N2=int(in2.sum()), n_both=int((in1 & in2).sum()), disjoint=not np.any(in1 & in2))


# -- constants -------------------------------------------------------------------------

def curvature_constant(pair_at, lo=0.0, hi=0.5, step=1e-3):
    """``c_f = max f''`` on ``[lo, hi]`` for ``f(x) = D(rho(x) || rho'(x))``.

    Central second differences with step ``h`` and ``h/2`` are combined by
    Richardson extrapolation at every grid point.
    """
    def f(x):
        rho, rho_p = pair_at(x)
        return relative_entropy(rho, rho_p)

    h = step
    best, arg = -math.inf, lo
    for x in np.linspace(lo, hi, int(round((hi - lo) / step)) + 1):
        f0 = f(x)
        d1 = (f(x + h) - 2 * f0 + f(x - h)) / h**2
        d2 = (f(x + h / 2) - 2 * f0 + f(x - h / 2)) / (h / 2) ** 2
        val = (4 * d2 - d1) / 3
        if val > best:
            best, arg = val, float(x)
    return best, arg


def _raw_pair(psi_a, psi_b):
    return lambda x: (_mixed_with(psi_a, x), _mixed_with(psi_b, x))


def bound_rhs(theorem, n, **params):
    """Regret floor of the named theorem at horizon ``n``.

    ``thm1``: ``actions`` (or ``c`` and ``c_f``); ``thm2``: ``c``; ``thm3``:
    ``k``; ``thm4``: nothing; ``thm5``: ``d`` (or ``c_f``).
    """
    tag = str(theorem).lower()
    tag = tag if tag.startswith("thm") else f"thm{tag}"
    if n < 1:
        raise ValueError("horizon must be positive")
    rn = math.sqrt(n)
    if tag == "thm1":
        c, c_f = params.get("c"), params.get("c_f")
        if c is None or c_f is None:
            pair = make_general_pair(params["actions"], 0.0)
            c = pair.meta["c"]
            c_f, _ = curvature_constant(_raw_pair(pair.meta["psi_a"], pair.meta["psi_b"]))
        rhs = c / 16 * math.exp(-c_f / 8) * rn
        return BoundReport("thm1", dict(n=n), rhs, dict(c=c, c_f=c_f))
    if tag == "thm2":
        c = params["c"]
        if not 0 <= c <= 1:
            raise ValueError("c must lie in [0, 1]")
        const = (math.sqrt(1 - c) - (1 - c)) / 30
        return BoundReport("thm2", dict(n=n, c=c), const * rn, dict(c=c, p=constant_p(c)))
    if tag == "thm3":
        k = params["k"]
        if n < 2 * (k - 1):
            raise ValueError(f"need n >= 2(k-1) = {2 * (k - 1)}")
        return BoundReport("thm3", dict(n=n, k=k), 0.03 * math.sqrt((k - 1) * n), dict(delta=thm3_delta(n, k)))
    if tag == "thm4":
        return BoundReport("thm4", dict(n=n), 3 / 200 * rn, dict(delta=1 / rn))
    if tag == "thm5":
        d = params["d"]
        c_f = params.get("c_f")
        if c_f is None:
            e0 = np.zeros(d, dtype=complex)
            e0[0] = 1
            c_f, _ = curvature_constant(_raw_pair(e0, uniform_superposition(d)))
        rhs = (d - 1) / (8 * d) * rn * math.exp(-c_f / 2)
        return BoundReport("thm5", dict(n=n, d=d), rhs, dict(c_f=c_f))
    raise ValueError(f"unknown theorem {theorem!r}")


def adversarial_delta(theorem, n, k=None):
    """The gap parameter each proof plugs in at horizon ``n``."""
    tag = str(theorem).lower().removeprefix("thm")
    if tag in ("1", "2"):
        return 1 / (2 * math.sqrt(n))
    if tag == "3":
        return thm3_delta(n, k)
    if tag in ("4", "5"):
        return 1 / math.sqrt(n)
    raise ValueError(f"unknown theorem {theorem!r}")
