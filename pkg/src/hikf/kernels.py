"""Generalized covariance functions defining the model-error covariance entrywise.

A kernel ``K(r)`` maps spatial separation to covariance.  The Gaussian and
exponential families are special cases of one stretched-exponential form

    K(r) = variance * exp(-(r / length_scale) ** power)

with ``power`` fixed to 2 and 1 respectively unless overridden.  The logarithm
family ``K(r) = A * log(r)`` (A < 0) is supported for matrix-vector products
but is singular at zero separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

_FAMILIES = ("gaussian", "exponential", "logarithm")

_DEFAULT_POWER = {"gaussian": 2.0, "exponential": 1.0}


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel description.

    Parameters
    ----------
    family:
        One of ``gaussian``, ``exponential``, ``logarithm``.
    variance:
        Value at zero separation for the gaussian/exponential families.
    length_scale:
        Correlation length, in the same units as point coordinates.
    power:
        Stretching exponent in (0, 2].  Defaults to 2 (gaussian) or
        1 (exponential); ignored by the logarithm family.
    log_amplitude:
        Amplitude ``A < 0`` of the logarithm family; unused otherwise.
    """

    family: str
    variance: float = 1.0
    length_scale: float = 1.0
    power: float | None = None
    log_amplitude: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if self.family == "logarithm":
            if self.log_amplitude is None or not self.log_amplitude < 0:
                raise ValueError("logarithm family requires log_amplitude < 0")
        else:
            if not self.variance >= 0:
                raise ValueError("variance must be >= 0")
            if not self.length_scale > 0:
                raise ValueError("length_scale must be > 0")
            p = self.effective_power
            if not (0 < p <= 2):
                raise ValueError("power must lie in (0, 2]")

    @property
    def effective_power(self) -> float:
        if self.family == "logarithm":
            raise ValueError("logarithm family has no power parameter")
        return _DEFAULT_POWER[self.family] if self.power is None else float(self.power)


def evaluate(spec: KernelSpec, r):
    """Evaluate ``K(r)`` for scalar or array separations ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("separation must be finite")
    if np.any(r < 0):
        raise ValueError("separation must be nonnegative")
    if spec.family == "logarithm":
        if np.any(r == 0):
            raise ValueError("logarithm kernel is singular at zero separation")
        out = spec.log_amplitude * np.log(r)
    else:
        p = spec.effective_power
        out = spec.variance * np.exp(-((r / spec.length_scale) ** p))
    if out.ndim == 0:
        return float(out)
    return out


def value_at_zero(spec: KernelSpec) -> float:
    """Zero-separation value; the logarithm diagonal is 0 by convention."""
    if spec.family == "logarithm":
        return 0.0
    return float(spec.variance)


def dense_gram(spec: KernelSpec, points) -> np.ndarray:
    """Dense Gram matrix ``G[i, j] = K(|x_i - x_j|)``.

    Intended as an oracle at modest sizes (caller keeps m small enough for
    dense storage).  Symmetric by construction; no jitter is added, so a
    downstream Cholesky failure is reported rather than masked.  For the
    logarithm family, exactly-coincident pairs take the zero-separation
    convention value.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (m, 2)")
    r = cdist(pts, pts)
    if spec.family == "logarithm":
        zero = r == 0
        r = np.where(zero, 1.0, r)
        gram = spec.log_amplitude * np.log(r)
        gram[zero] = value_at_zero(spec)
    else:
        gram = evaluate(spec, r)
    return 0.5 * (gram + gram.T)


def eval_cross(spec: KernelSpec, targets, sources) -> np.ndarray:
    """Rectangular kernel block ``K(|t_i - s_j|)`` with the r=0 convention."""
    r = cdist(np.asarray(targets, dtype=float), np.asarray(sources, dtype=float))
    if spec.family == "logarithm":
        zero = r == 0
        r = np.where(zero, 1.0, r)
        out = spec.log_amplitude * np.log(r)
        out[zero] = value_at_zero(spec)
        return out
    return evaluate(spec, r)
