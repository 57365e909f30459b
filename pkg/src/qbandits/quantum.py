"""Finite-dimensional quantum linear algebra.

Density matrices and observables are plain complex ``numpy`` arrays; the
helpers here validate them, decompose them and compute the distances and
divergences used by the bandit code. Natural logarithms throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

HERMITIAN_TOL = 1e-10
DENSITY_TOL = 1e-10
SUPPORT_TOL = 1e-12

PAULI_LABELS = "IXYZ"
_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class InvalidOperatorError(ValueError):
    """Raised for matrices that are not Hermitian or not valid states."""


class DimensionMismatchError(ValueError):
    """Raised when two operators act on spaces of different dimension."""


class NumericalError(ArithmeticError):
    """Raised when floating-point results leave their admissible range."""


def _square(M, name="operator"):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidOperatorError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    return M


def _same_dim(A, B):
    if A.shape != B.shape:
        raise DimensionMismatchError(f"dimension mismatch: {A.shape} vs {B.shape}")


def is_hermitian(M, tol=HERMITIAN_TOL):
    M = np.asarray(M)
    return M.ndim == 2 and M.shape[0] == M.shape[1] and np.allclose(M, M.conj().T, rtol=0, atol=tol)


def hermitian(M, tol=HERMITIAN_TOL):
    """Validate ``M`` as Hermitian and return its symmetrised copy."""
    M = _square(M)
    if not np.allclose(M, M.conj().T, rtol=0, atol=tol):
        raise InvalidOperatorError("operator is not Hermitian")
    return (M + M.conj().T) / 2


def density_matrix(M, tol=DENSITY_TOL):
    """Validate ``M`` as a density matrix (Hermitian, PSD, unit trace).

    Returns a symmetrised, read-only copy.
    """
    rho = hermitian(M, tol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise InvalidOperatorError(f"trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -tol:
        raise InvalidOperatorError(f"minimum eigenvalue {lam_min!r} is negative")
    rho.setflags(write=False)
    return rho


def is_density_matrix(M, tol=DENSITY_TOL):
    try:
        density_matrix(M, tol)
    except InvalidOperatorError:
        return False
    return True


def purity(rho):
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def pure_state(psi):
    """Projector onto the normalised vector ``psi``."""
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(d):
    return np.eye(d, dtype=complex) / d


# ---------------------------------------------------------------------------
# spectral decompositions and observables


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues (strictly descending) with their eigenprojectors."""

    eigenvalues: np.ndarray
    projectors: tuple

    def reconstruct(self):
        return sum(lam * P for lam, P in zip(self.eigenvalues, self.projectors))

    def __len__(self):
        return len(self.eigenvalues)


def spectral_decompose(O, group_tol=None):
    """Group the eigenvalues of a Hermitian operator into distinct levels.

    Eigenvalues closer than ``group_tol`` (default ``1e-8 * max(1, ||O||)``)
    to the top of the current group are merged; each level keeps the mean
    of its members and the projector onto the merged eigenspace.
    """
    H = hermitian(O)
    w, V = np.linalg.eigh(H)
    if group_tol is None:
        group_tol = 1e-8 * max(1.0, float(np.max(np.abs(w))))
    if group_tol <= 0:
        raise ValueError("group_tol must be positive")
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    groups = [[0]]
    for i in range(1, len(w)):
        if w[groups[-1][0]] - w[i] <= group_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    values = np.array([w[g].mean() for g in groups])
    projectors = []
    for g in groups:
        Vg = V[:, g]
        P = Vg @ Vg.conj().T
        P.setflags(write=False)
        projectors.append(P)
    values.setflags(write=False)
    return SpectralDecomposition(values, tuple(projectors))


@dataclass(frozen=True)
class Observable:
    """An arm: a Hermitian operator together with its cached spectrum."""

    op: np.ndarray
    spectrum: SpectralDecomposition
    label: str = ""
    subnormalised: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "subnormalised", bool(np.max(np.abs(self.spectrum.eigenvalues)) <= 1 + 1e-10))

    @classmethod
    def from_matrix(cls, M, label="", group_tol=None):
        H = hermitian(M)
        H.setflags(write=False)
        return cls(H, spectral_decompose(H, group_tol), label)

    @property
    def dim(self):
        return self.op.shape[0]

    @property
    def norm(self):
        return float(np.max(np.abs(self.spectrum.eigenvalues)))

    def top_eigenvector(self):
        """Eigenvector of the largest eigenvalue (first one returned by ``eigh``)."""
        w, V = np.linalg.eigh(self.op)
        top = np.flatnonzero(w >= w[-1] - 1e-8 * max(1.0, abs(w[-1])))
        return V[:, top[0]]

    def __repr__(self):
        return f"Observable({self.label or 'unnamed'}, dim={self.dim})"


def expected_value(rho, O):
    """Born-rule mean ``Tr(rho O)``; accepts arrays or :class:`Observable`."""
    rho = np.asarray(rho)
    M = O.op if isinstance(O, Observable) else np.asarray(O)
    _same_dim(rho, M)
    val = np.vdot(M.conj().T, rho)  # sum_ij rho_ij M_ji
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalError(f"Tr(rho O) has imaginary part {val.imag!r}")
    return float(val.real)


# ---------------------------------------------------------------------------
# distances and divergences


def _psd_sqrt(rho):
    w, V = np.linalg.eigh(rho)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def trace_norm(X):
    X = np.asarray(X)
    return float(np.sum(np.abs(np.linalg.eigvalsh((X + X.conj().T) / 2))))


def trace_distance(rho, sigma):
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    _same_dim(rho, sigma)
    return min(1.0, 0.5 * trace_norm(rho - sigma))


def fidelity(rho, sigma):
    """Squared root-fidelity ``(Tr|sqrt(rho) sqrt(sigma)|)^2``."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    _same_dim(rho, sigma)
    s = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    return float(min(1.0, np.sum(s) ** 2))


def relative_entropy(rho, sigma, support_tol=SUPPORT_TOL):
    """Quantum relative entropy ``D(rho||sigma)``; ``inf`` off support."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    _same_dim(rho, sigma)
    p, _ = np.linalg.eigh(rho)
    s, W = np.linalg.eigh(sigma)
    thr = support_tol * max(float(s[-1]), 0.0)
    kernel = s <= thr
    # weight of rho on the kernel of sigma
    weights = np.real(np.einsum("ij,ik,kj->j", W.conj(), rho, W))
    if np.any(kernel) and np.sum(weights[kernel]) > support_tol * max(float(p[-1]), 0.0):
        return float("inf")
    p = p[p > support_tol * p[-1]]
    ent = float(np.sum(p * np.log(p)))
    cross = float(np.sum(weights[~kernel] * np.log(s[~kernel])))
    return max(0.0, ent - cross)


def renyi_half(rho, sigma):
    """Order-1/2 Rényi divergence ``-log F(rho, sigma)``."""
    F = fidelity(rho, sigma)
    return float("inf") if F <= 0.0 else max(0.0, -np.log(F))


def purified_distance(rho, sigma):
    return float(np.sqrt(max(0.0, 1.0 - fidelity(rho, sigma))))


# ---------------------------------------------------------------------------
# Pauli strings and orthonormal Hermitian bases


@lru_cache(maxsize=None)
def _pauli_string_matrices(m):
    out = []
    for letters in itertools.product(PAULI_LABELS, repeat=m):
        M = np.array([[1.0 + 0j]])
        for c in letters:
            M = np.kron(M, _PAULI_1Q[c])
        M.setflags(write=False)
        out.append(("".join(letters), M))
    return tuple(out)


def pauli_strings(m, include_identity=False):
    """All ``m``-qubit Pauli strings in lexicographic order over ``I, X, Y, Z``."""
    if m < 1:
        raise ValueError("need at least one qubit")
    return [
        Observable.from_matrix(M, label)
        for label, M in _pauli_string_matrices(m)
        if include_identity or set(label) != {"I"}
    ]


def pauli_matrix(label):
    M = np.array([[1.0 + 0j]])
    for c in label:
        M = np.kron(M, _PAULI_1Q[c])
    return M


@dataclass(frozen=True)
class HermitianBasis:
    """``d**2`` Hermitian matrices, orthonormal under ``Tr(A B)``, first ``I/sqrt(d)``."""

    dim: int
    elements: np.ndarray  # shape (d*d, d, d)
    labels: tuple

    def __len__(self):
        return self.elements.shape[0]

    def gram(self):
        return np.real(np.einsum("aij,bji->ab", self.elements, self.elements))


def _gell_mann(d):
    mats, labels = [np.eye(d, dtype=complex) / np.sqrt(d)], ["I"]
    for j in range(d):
        for k in range(j + 1, d):
            S = np.zeros((d, d), dtype=complex)
            S[j, k] = S[k, j] = 1 / np.sqrt(2)
            A = np.zeros((d, d), dtype=complex)
            A[j, k], A[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats += [S, A]
            labels += [f"S{j}{k}", f"A{j}{k}"]
    for l in range(1, d):
        D = np.zeros((d, d), dtype=complex)
        D[np.arange(l), np.arange(l)] = 1
        D[l, l] = -l
        mats.append(D / np.sqrt(l * (l + 1)))
        labels.append(f"D{l}")
    return mats, labels


@lru_cache(maxsize=None)
def orthonormal_hermitian_basis(d):
    """Scaled Pauli strings when ``d`` is a power of two, Gell-Mann otherwise."""
    if d < 2:
        raise ValueError("basis needs d >= 2")
    m = d.bit_length() - 1
    if 1 << m == d:
        pairs = _pauli_string_matrices(m)
        mats = [M / np.sqrt(d) for _, M in pairs]
        labels = [lab for lab, _ in pairs]
    else:
        mats, labels = _gell_mann(d)
    elements = np.array(mats)
    elements.setflags(write=False)
    return HermitianBasis(d, elements, tuple(labels))


def vectorize(H, basis=None):
    """Real coordinates ``Tr(H sigma_i)`` of a Hermitian operator."""
    H = np.asarray(H, dtype=complex)
    if basis is None:
        basis = orthonormal_hermitian_basis(H.shape[0])
    if H.shape != (basis.dim, basis.dim):
        raise DimensionMismatchError(f"operator shape {H.shape} vs basis dim {basis.dim}")
    return np.real(np.einsum("kij,ji->k", basis.elements, H))


def devectorize(v, basis):
    v = np.asarray(v, dtype=float)
    if v.shape != (len(basis),):
        raise DimensionMismatchError(f"vector of length {v.shape} vs basis of size {len(basis)}")
    return np.einsum("k,kij->ij", v, basis.elements)


# ---------------------------------------------------------------------------
# qubits


def bloch_to_state(r):
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector must have three components")
    if np.linalg.norm(r) > 1 + 1e-10:
        raise InvalidOperatorError(f"Bloch vector norm {np.linalg.norm(r)!r} exceeds 1")
    return 0.5 * (np.eye(2) + r[0] * _PAULI_1Q["X"] + r[1] * _PAULI_1Q["Y"] + r[2] * _PAULI_1Q["Z"])


def state_to_bloch(rho):
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DimensionMismatchError("Bloch vectors exist only for d = 2")
    return np.array([expected_value(rho, _PAULI_1Q[c]) for c in "XYZ"])


# ---------------------------------------------------------------------------
# random instances (tests, experiments)


def random_pure_state(d, rng):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return pure_state(psi)


def random_density_matrix(d, rng, rank=None):
    """Induced (Ginibre) measure; full rank unless ``rank`` is given."""
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng, scale=1.0):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (G + G.conj().T) / 2
