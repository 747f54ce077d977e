"""Dense complex matrix primitives for small dimensions.

Everything operates on plain ``numpy`` complex arrays.  The routines here are
the only place the rest of the package goes for Hermiticity repair, spectral
positivity checks, and commutators, so their tolerances are fixed once.
Dimensions are capped at 16: the target systems are few-level, and small dense
storage keeps the stochastic inner loops allocation-free.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NonHermitianError

MAX_DIM = 16

HERMITICITY_TOL = 1e-10


def as_cmatrix(m) -> np.ndarray:
    """Coerce to a square complex matrix of admissible dimension."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    if not 1 <= a.shape[0] <= MAX_DIM:
        raise DimensionMismatchError(
            f"dimension {a.shape[0]} outside supported range 1..{MAX_DIM}"
        )
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (M + M†)/2.

    Idempotent, and the fixed point of any Hermitian input.  Used after every
    stochastic step to stop anti-Hermitian rounding drift from accumulating.
    """
    m = as_cmatrix(m)
    return 0.5 * (m + m.conj().T)


def hermiticity_defect(m: np.ndarray) -> float:
    """max |M_ij - conj(M_ji)| over all entries."""
    return float(np.abs(m - m.conj().T).max())


def min_eigenvalue(h: np.ndarray, tol: float = HERMITICITY_TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix.

    Raises ``NonHermitianError`` naming the worst entry pair if the input is
    not Hermitian within ``tol``.
    """
    h = as_cmatrix(h)
    defect = np.abs(h - h.conj().T)
    worst = float(defect.max())
    if worst > tol:
        i, j = np.unravel_index(int(defect.argmax()), defect.shape)
        raise NonHermitianError(
            f"matrix not Hermitian: |H[{i},{j}] - conj(H[{j},{i}])| = {worst:.3e} > {tol:.1e}"
        )
    return float(np.linalg.eigvalsh(h)[0])


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """AB - BA."""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a
