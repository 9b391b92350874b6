"""The three assimilation engines: dense KF, cross-covariance filter, EnKF.

All filters share one step structure for the random-walk model: predict
(mean unchanged, uncertainty grows by Q), then update against one
observation vector.  The cross-covariance filter never forms the m x m
covariance; it carries C = P H^T, the per-cell variance vector, and the
n x n product H C, which together are enough to form the gain, correct the
mean and track the posterior variance.  The EnKF is the perturbed-observation
variant: each member sees the observation plus an independent N(0, R) draw,
and the gain is formed from anomaly products without materializing the
sample covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse

from hikf.fmm import FmmTree
from hikf.kernels import dense_gram, value_at_zero
from hikf.linalg import spd_solve
from hikf.ssm import StateSpaceModel


class NumericalConsistencyError(RuntimeError):
    """A tracked quantity left its mathematically guaranteed range."""


def _require_obs(H, z, m):
    z = np.asarray(z, dtype=float)
    if H.shape[0] != z.shape[0]:
        raise ValueError("observation length does not match operator rows")
    if H.shape[1] != m:
        raise ValueError("operator columns do not match state length")
    return z


# ----------------------------------------------------------------------
# dense Kalman filter
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class KfState:
    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)


def kf_init(model: StateSpaceModel) -> KfState:
    m = model.m
    return KfState(mean=model.initial_mean.copy(), cov=model.alpha * np.eye(m))


def kf_predict(state: KfState, Q: np.ndarray) -> KfState:
    if Q.shape != state.cov.shape:
        raise ValueError("Q shape does not match covariance")
    return KfState(mean=state.mean, cov=state.cov + Q)


def kf_update(state: KfState, H, r_variance: float, z) -> KfState:
    z = _require_obs(H, z, len(state.mean))
    n = H.shape[0]
    if n == 0:
        return state
    C = H @ state.cov  # (n, m); equals (P H^T)^T by symmetry
    C = np.asarray(C)
    S = np.asarray(H @ C.T) + r_variance * np.eye(n)
    K = spd_solve(0.5 * (S + S.T), C).T  # (m, n)
    mean = state.mean + K @ (z - H @ state.mean)
    cov = state.cov - K @ C
    cov = 0.5 * (cov + cov.T)
    return KfState(mean=mean, cov=cov)


# ----------------------------------------------------------------------
# cross-covariance filter
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class HikfPrecompute:
    """Per-monitoring-configuration products, computed once."""

    C_Q: np.ndarray = field(repr=False)  # (m, n) = Q H^T
    HC_Q: np.ndarray = field(repr=False)  # (n, n) = H Q H^T
    diag_Q: np.ndarray = field(repr=False)  # (m,)


@dataclass(frozen=True)
class HikfState:
    mean: np.ndarray = field(repr=False)
    cross_cov: np.ndarray = field(repr=False)  # (m, n) = P H^T
    variance: np.ndarray = field(repr=False)  # (m,) = diag(P)
    HC: np.ndarray = field(repr=False)  # (n, n) = H P H^T, kept incrementally


def hikf_precompute_fmm(model: StateSpaceModel, tree: FmmTree) -> HikfPrecompute:
    """Form Q H^T through the fast kernel product (one matmat over H^T)."""
    Ht = np.asarray(model.H.T.todense()) if scipy.sparse.issparse(model.H) else model.H.T
    C_Q = tree.matmat(np.ascontiguousarray(Ht))
    HC_Q = np.asarray(model.H @ C_Q)
    diag_Q = np.full(model.m, value_at_zero(model.q_kernel))
    return HikfPrecompute(C_Q=C_Q, HC_Q=0.5 * (HC_Q + HC_Q.T), diag_Q=diag_Q)


def hikf_precompute_dense(model: StateSpaceModel) -> HikfPrecompute:
    """Exact dense-algebra path; the oracle against which the fast path is checked."""
    Q = dense_gram(model.q_kernel, model.grid.cell_centers().coords)
    C_Q = Q @ np.asarray(model.H.T.todense())
    HC_Q = np.asarray(model.H @ C_Q)
    return HikfPrecompute(
        C_Q=C_Q, HC_Q=0.5 * (HC_Q + HC_Q.T), diag_Q=np.diag(Q).copy()
    )


def hikf_init(model: StateSpaceModel) -> HikfState:
    Ht = np.asarray(model.H.T.todense())
    HHt = np.asarray(model.H @ Ht)
    return HikfState(
        mean=model.initial_mean.copy(),
        cross_cov=model.alpha * Ht,
        variance=np.full(model.m, model.alpha),
        HC=model.alpha * HHt,
    )


def hikf_predict(state: HikfState, pre: HikfPrecompute) -> HikfState:
    return HikfState(
        mean=state.mean,
        cross_cov=state.cross_cov + pre.C_Q,
        variance=state.variance + pre.diag_Q,
        HC=state.HC + pre.HC_Q,
    )


def hikf_update(state: HikfState, H, r_variance: float, z) -> HikfState:
    z = _require_obs(H, z, len(state.mean))
    n = H.shape[0]
    if n == 0:
        return state
    C = state.cross_cov
    S = state.HC + r_variance * np.eye(n)
    S = 0.5 * (S + S.T)
    K = spd_solve(S, C.T).T  # (m, n)
    mean = state.mean + K @ (z - H @ state.mean)
    variance = state.variance - np.einsum("ij,ij->i", K, C)
    prior_max = max(float(state.variance.max()), 0.0)
    if variance.min() < -1e-10 * max(prior_max, np.finfo(float).tiny):
        raise NumericalConsistencyError(
            f"posterior variance went negative beyond tolerance (min {variance.min():.3e})"
        )
    KH = spd_solve(S, state.HC.T).T  # (n, n) gain seen through H
    cross_cov = C - K @ state.HC
    HC = state.HC - KH @ state.HC
    return HikfState(mean=mean, cross_cov=cross_cov, variance=variance, HC=HC)


# ----------------------------------------------------------------------
# ensemble Kalman filter (perturbed observations)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class EnkfState:
    ensemble: np.ndarray = field(repr=False)  # (m, N)

    @property
    def size(self) -> int:
        return self.ensemble.shape[1]


class QSampler:
    """Draws model-noise realizations w ~ N(0, Q) via a dense Cholesky factor.

    A diagonal jitter of 1e-10 times the kernel variance keeps the factor
    stable for near-coincident points; intended for benchmark scales
    (m up to ~1e4).
    """

    def __init__(self, model: StateSpaceModel):
        Q = dense_gram(model.q_kernel, model.grid.cell_centers().coords)
        jitter = 1e-10 * value_at_zero(model.q_kernel)
        Q[np.diag_indices_from(Q)] += jitter
        self._chol = np.linalg.cholesky(Q)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self._chol @ rng.standard_normal((self._chol.shape[0], count))


def enkf_init(model: StateSpaceModel, size: int, rng: np.random.Generator) -> EnkfState:
    if size < 2:
        raise ValueError("ensemble size must be >= 2")
    draws = np.sqrt(model.alpha) * rng.standard_normal((model.m, size))
    return EnkfState(ensemble=model.initial_mean[:, None] + draws)


def enkf_predict(state: EnkfState, sampler: QSampler, rng: np.random.Generator) -> EnkfState:
    return EnkfState(ensemble=state.ensemble + sampler.sample(rng, state.size))


def enkf_update(state: EnkfState, H, r_variance: float, z, rng: np.random.Generator) -> EnkfState:
    z = _require_obs(H, z, state.ensemble.shape[0])
    n = H.shape[0]
    if n == 0:
        return state
    X = state.ensemble
    N = state.size
    mean, _, A = enkf_statistics(state)
    HA = np.asarray(H @ A)  # (n, N)
    S = HA @ HA.T + r_variance * np.eye(n)
    # perturbed observations: every member sees z plus an independent draw
    perturbed = z[:, None] + np.sqrt(r_variance) * rng.standard_normal((n, N))
    innov = perturbed - np.asarray(H @ X)
    # K d = A (HA)^T S^{-1} d, applied right-to-left; A A^T never formed
    X_new = X + A @ (HA.T @ spd_solve(0.5 * (S + S.T), innov))
    return EnkfState(ensemble=X_new)


def enkf_step(
    state: EnkfState,
    sampler: QSampler,
    H,
    r_variance: float,
    z,
    rng: np.random.Generator,
) -> EnkfState:
    return enkf_update(enkf_predict(state, sampler, rng), H, r_variance, z, rng)


def enkf_statistics(state: EnkfState):
    """Sample mean, per-cell sample variance, and the anomaly matrix A.

    A is scaled by 1/sqrt(N - 1), so the sample covariance is A A^T.
    """
    X = state.ensemble
    N = state.size
    mean = X.mean(axis=1)
    A = (X - mean[:, None]) / np.sqrt(N - 1)
    variance = np.einsum("ij,ij->i", A, A)
    return mean, variance, A
