"""Quantitative evaluation: errors, spectra, effective rank, cost accounting."""

from __future__ import annotations

import warnings

import numpy as np

from hikf.filters import EnkfState, enkf_statistics
from hikf.linalg import sym_eig


def relative_error(x_est: np.ndarray, x_ref: np.ndarray) -> float:
    """l2 error of the estimate relative to the reference.

    If the reference is identically zero the absolute norm is returned and a
    warning is emitted.
    """
    x_est = np.asarray(x_est, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x_est.shape != x_ref.shape:
        raise ValueError("estimate and reference must have the same shape")
    ref_norm = np.linalg.norm(x_ref)
    diff = np.linalg.norm(x_est - x_ref)
    if ref_norm == 0.0:
        warnings.warn("reference norm is zero; returning absolute error norm")
        return float(diff)
    return float(diff / ref_norm)


def effective_rank(eigenvalues, fraction: float = 0.95) -> int:
    """Least number of leading eigenvalues explaining the given variance fraction."""
    if not (0 < fraction <= 1):
        raise ValueError("fraction must lie in (0, 1]")
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be sorted descending")
    if np.any(lam < 0):
        warnings.warn("negative eigenvalues clamped to zero")
        lam = np.clip(lam, 0.0, None)
    total = lam.sum()
    if total == 0.0:
        warnings.warn("all-zero spectrum; effective rank defined as 0")
        return 0
    cum = np.cumsum(lam) / total
    return int(np.searchsorted(cum, fraction - 1e-15) + 1)


def kf_posterior_spectrum(cov: np.ndarray) -> np.ndarray:
    """Descending, clamped eigenvalues of a dense posterior covariance."""
    w, _ = sym_eig(cov)
    return np.clip(w, 0.0, None)


def enkf_posterior_spectrum(state: EnkfState, pad_to: int | None = None) -> np.ndarray:
    """Sample-covariance spectrum via the small N x N Gram matrix of anomalies.

    The nonzero eigenvalues of A A^T equal those of A^T A; the result is
    zero-padded to the state dimension (or ``pad_to``) for plotting against
    dense spectra.
    """
    _, _, A = enkf_statistics(state)
    w, _ = sym_eig(A.T @ A)
    w = np.clip(w, 0.0, None)
    if pad_to is None:
        pad_to = A.shape[0]
    if pad_to > len(w):
        w = np.concatenate([w, np.zeros(pad_to - len(w))])
    return w


def storage_bytes(kind: str, m: int, n: int = 0, ensemble_size: int = 0) -> dict:
    """Dominant-term payload accounting in bytes of double precision.

    kf: the dense covariance.  enkf: the ensemble matrix.  For the
    cross-covariance filter the online state (C plus the variance vector) is
    reported separately from the precomputed products (Q H^T and diag Q),
    which are fixed per monitoring configuration.
    """
    if kind == "kf":
        return {"total": 8 * m * m, "online_state": 8 * m * m}
    if kind == "hikf":
        online = 8 * (m * n + m)
        precomputed = 8 * (m * n + m)
        return {"total": online + precomputed, "online_state": online, "precomputed": precomputed}
    if kind == "enkf":
        return {"total": 8 * m * ensemble_size, "online_state": 8 * m * ensemble_size}
    raise ValueError(f"unknown filter kind {kind!r}")


def account_costs(traces: dict) -> dict:
    """Summarize timing/storage traces into one table-shaped dict.

    ``traces`` maps a filter label to a dict with keys ``precompute_seconds``,
    ``online_seconds`` and ``storage``.
    """
    return {
        label: {
            "precompute_seconds": float(t.get("precompute_seconds", 0.0)),
            "online_seconds": float(t["online_seconds"]),
            "storage_bytes": t["storage"],
        }
        for label, t in traces.items()
    }
