"""Small dense linear algebra: SPD solves and symmetric eigendecomposition.

These wrap LAPACK through scipy/numpy; the point of the module is a single
place where decomposition failure is turned into an explicit error instead of
garbage output.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class DecompositionError(RuntimeError):
    """A matrix factorization failed (e.g. Cholesky on a non-PD matrix)."""


def spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A`` via Cholesky.

    Raises
    ------
    DecompositionError
        If the Cholesky factorization encounters a nonpositive pivot.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    scale = np.abs(A).max()
    if scale > 0 and np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("A is not symmetric within tolerance")
    try:
        c, low = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DecompositionError(f"Cholesky factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), B, check_finite=False)


def sym_eig(A: np.ndarray):
    """Eigendecomposition of a symmetric matrix.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return w[::-1].copy(), V[:, ::-1].copy()
