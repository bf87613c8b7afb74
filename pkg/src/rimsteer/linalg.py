"""Dense complex matrix kernel and Hilbert-Schmidt (HS) space conventions.

Vectorization is row-stacking throughout the package:

    A = sum_ij a_ij |i><j|   <->   |A>> = sum_ij a_ij |ij>>,  |ij>> = |i> x |j>

so ``vec(A) = A.reshape(-1)`` in C order, and the superoperator X(.)Y on the
Hilbert space becomes the ordinary matrix ``kron(X, Y.T)`` on HS space:

    vec(X @ rho @ Y) = kron(X, Y.T) @ vec(rho).

The HS inner product is <<A|B>> = Tr(A^dag B) = vec(A)^dag vec(B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonHermitianInput, NotPSD
from .tolerances import (
    ATOL_ALGEBRAIC,
    ATOL_STRUCTURAL,
    EIG_CLUSTER_GAP,
    EIG_COND_LIMIT,
    PSD_FLOOR,
)

__all__ = [
    "dagger",
    "frobenius_norm",
    "is_hermitian",
    "kron",
    "expm_hermitian",
    "expm_general",
    "vec",
    "devec",
    "hs_inner",
    "identity_bra",
    "left_right_superop",
    "conjugation_superop",
    "psd_sqrt",
    "fidelity",
    "trace_distance",
    "SpectralDecomposition",
    "eig_general",
]


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def frobenius_norm(a: np.ndarray) -> float:
    """sqrt(Tr(A^dag A))."""
    return float(np.linalg.norm(a))


def is_hermitian(a: np.ndarray, atol: float = ATOL_STRUCTURAL) -> bool:
    return bool(np.abs(a - dagger(a)).max() <= atol)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two square matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatch(f"kron expects square matrices, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def expm_hermitian(h: np.ndarray, t: float, atol: float = ATOL_STRUCTURAL) -> np.ndarray:
    """Unitary exp(-i h t) for Hermitian h, via eigendecomposition.

    The eigendecomposition route keeps the output unitary to rounding error,
    which scaling-and-squaring does not guarantee.

    Raises
    ------
    NonHermitianInput
        If ``h`` deviates from Hermiticity by more than ``atol``.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, atol):
        raise NonHermitianInput(
            f"generator deviates from Hermiticity by {np.abs(h - dagger(h)).max():.3e}"
        )
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def expm_general(a: np.ndarray) -> np.ndarray:
    """exp(A) for a general (e.g. Liouvillian) matrix, scaling-and-squaring."""
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


# --------------------------------------------------------------------------
# Vectorization
# --------------------------------------------------------------------------

def vec(a: np.ndarray) -> np.ndarray:
    """Row-stacking vectorization |A>> of a square matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"vec expects a square matrix, got shape {a.shape}")
    return a.reshape(-1)


def devec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec`; the length must be a perfect square."""
    v = np.asarray(v).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatch(f"cannot devec a vector of length {v.size}")
    return v.reshape(d, d)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product <<A|B>> = Tr(A^dag B)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"hs_inner shapes differ: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def identity_bra(dim: int) -> np.ndarray:
    """<<I| as a row vector; contracting it with |rho>> gives Tr(rho)."""
    return np.eye(dim, dtype=complex).reshape(-1).conj()


def left_right_superop(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """HS-space matrix of the map rho -> X rho Y."""
    return np.kron(x, y.T)


def conjugation_superop(u: np.ndarray) -> np.ndarray:
    """HS-space matrix of rho -> U rho U^dag."""
    return np.kron(u, u.conj())


# --------------------------------------------------------------------------
# Positive matrices
# --------------------------------------------------------------------------

def psd_sqrt(rho: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Positive square root of a PSD Hermitian matrix.

    Eigenvalues in [floor, 0) are treated as rounding noise and clipped to
    zero; anything below ``floor`` raises :class:`NotPSD`.
    """
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho):
        raise NonHermitianInput("psd_sqrt expects a Hermitian matrix")
    w, v = np.linalg.eigh(rho)
    if w.min() < floor:
        raise NotPSD(f"matrix has eigenvalue {w.min():.3e} below floor {floor:.1e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def fidelity(rho_fix: np.ndarray, rho: np.ndarray, floor: float = PSD_FLOOR) -> float:
    """State fidelity F(rho_fix, rho) = Tr sqrt(sqrt(rho) rho_fix sqrt(rho)).

    Symmetric in its arguments; equals 1 iff the states coincide and 0 for
    orthogonally supported states.
    """
    s = psd_sqrt(rho, floor)
    inner = s @ np.asarray(rho_fix, dtype=complex) @ s
    w = np.linalg.eigvalsh(0.5 * (inner + dagger(inner)))
    if w.min() < floor:
        raise NotPSD(f"fidelity inner matrix has eigenvalue {w.min():.3e}")
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) ||a - b||_1 for Hermitian a, b."""
    w = np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))
    return float(0.5 * np.abs(w).sum())


# --------------------------------------------------------------------------
# General (non-Hermitian) eigendecomposition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDecomposition:
    """Right/left eigensystem of a general matrix, sorted deterministically.

    Eigenvalues are sorted by descending modulus; ties break by descending
    real then imaginary part.  Left vectors are rescaled so that
    <<L_i|R_i>> = 1 whenever that overlap is resolvable; the biorthonormal
    pairing <<L_i|R_j>> = delta_ij then holds for simple eigenvalues.

    ``clustered`` / ``defective`` are non-fatal diagnostics: eigenvalue pairs
    closer than the cluster gap, or an eigenvector matrix condition number
    beyond the limit, mean the biorthonormal system is unreliable and callers
    should fall back to projector-based constructions.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray   # columns
    left_vectors: np.ndarray    # columns
    clustered: bool
    defective: bool
    min_gap: float
    eigvec_cond: float


def _spectral_order(w: np.ndarray) -> np.ndarray:
    return np.lexsort((-w.imag, -w.real, -np.abs(w)))


def eig_general(
    m: np.ndarray,
    cluster_gap: float = EIG_CLUSTER_GAP,
    cond_limit: float = EIG_COND_LIMIT,
) -> SpectralDecomposition:
    """Eigendecomposition with biorthonormalized left/right vectors.

    Near-degenerate clusters are reported, not repaired: the returned left
    vectors keep their raw scaling wherever <<L_i|R_i>> is numerically zero.
    """
    m = np.asarray(m, dtype=complex)
    w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    order = _spectral_order(w)
    w, vl, vr = w[order], vl[:, order], vr[:, order]

    overlaps = np.einsum("ij,ij->j", vl.conj(), vr)
    safe = np.abs(overlaps) > 1e-14
    vl = vl.copy()
    vl[:, safe] = vl[:, safe] / overlaps[safe].conj()

    if len(w) > 1:
        diffs = np.abs(w[:, None] - w[None, :])
        np.fill_diagonal(diffs, np.inf)
        min_gap = float(diffs.min())
    else:
        min_gap = np.inf
    cond = float(np.linalg.cond(vr))
    return SpectralDecomposition(
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=vl,
        clustered=bool(min_gap < cluster_gap) or not bool(safe.all()),
        defective=bool(cond > cond_limit),
        min_gap=min_gap,
        eigvec_cond=cond,
    )
