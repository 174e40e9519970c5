"""Quaternion unscented Kalman filter: augmentation, manifold sigma points, time and measurement updates.

Every function works on a batch of filters at once. Moments carry a leading
batch axis (one entry per particle); sigma-point arrays add a sigma axis after
it. Reductions over sigma points use a fixed order, so a filter's result does not
depend on which other filters share its batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from numpy.typing import ArrayLike, NDArray

from . import geometry as geo
from .errors import PreconditionError
from .kinematics import ERROR_DIM, ImuSample, NavState, WorldParams, propagate_exact
from .sensing import ImuNoiseParams, landmark_h

Array = NDArray[np.float64]

NOISE_DIM = 6
AUG_DIM = ERROR_DIM + NOISE_DIM  # m_a - 1
N_SIGMA = 2 * AUG_DIM + 1


@dataclass(frozen=True)
class UkfTuning:
    lam: float = 1.0
    alpha: float = 1.0
    beta: float = 2.0

    def __post_init__(self) -> None:
        if not self.lam + AUG_DIM > 0.0:
            raise PreconditionError(f"lambda + {AUG_DIM} must be positive (lambda={self.lam})")

    def weights(self) -> tuple[Array, Array]:
        """Mean and covariance weights for the 43 sigma points."""
        n = AUG_DIM + self.lam
        wm = np.full(N_SIGMA, 1.0 / (2.0 * n))
        wc = wm.copy()
        wm[0] = self.lam / n
        wc[0] = self.lam / n + 1.0 - self.alpha**2 + self.beta
        return wm, wc


@dataclass
class UkfMoments:
    """Mean state and 15x15 error covariance (``[dr, dp, dv, db_omega, db_acc]``)."""

    mean: NavState
    cov: Array


@dataclass
class AugmentedMoments:
    mean: NavState
    noise_mean: Array
    cov: Array


@dataclass
class SigmaPointSet:
    """``points`` has batch shape ``(..., 43)``; ``noise`` holds the ``[n_omega, n_acc]`` parts."""

    points: NavState
    noise: Array
    weights_m: Array
    weights_c: Array


def augment(moments: UkfMoments, noise: ImuNoiseParams) -> AugmentedMoments:
    cov = np.asarray(moments.cov, dtype=float)
    batch = cov.shape[:-2]
    aug = np.zeros(batch + (AUG_DIM, AUG_DIM))
    aug[..., :ERROR_DIM, :ERROR_DIM] = cov
    aug[..., ERROR_DIM:, ERROR_DIM:] = noise.C_x
    return AugmentedMoments(moments.mean, np.zeros(batch + (NOISE_DIM,)), aug)


def sigma_points(aug: AugmentedMoments, tuning: UkfTuning) -> SigmaPointSet:
    """Symmetric sigma set from the scaled lower Cholesky factor of the augmented covariance.

    Point 0 is the mean; points ``j`` and ``j + 21`` are the mean moved by plus and
    minus column ``j``. The first three coordinates of each column act on the
    quaternion through boxplus / boxminus, the rest additively.
    """
    L = geo.cholesky(aug.cov) * np.sqrt(AUG_DIM + tuning.lam)
    cols = np.swapaxes(L, -1, -2)  # cols[..., j, :] is column j
    q = aug.mean.q[..., None, :]
    q_plus = geo.boxplus(q, cols[..., :3])
    q_minus = geo.boxminus_qr(q, cols[..., :3])
    rest = aug.mean.rest[..., None, :]
    noise0 = aug.noise_mean[..., None, :]
    batch = cols.shape[:-2]
    pts = np.empty(batch + (N_SIGMA, 16))
    pts[..., 0, :] = aug.mean.data
    pts[..., 1:AUG_DIM + 1, :4] = q_plus
    pts[..., AUG_DIM + 1:, :4] = q_minus
    pts[..., 1:AUG_DIM + 1, 4:] = rest + cols[..., 3:ERROR_DIM]
    pts[..., AUG_DIM + 1:, 4:] = rest - cols[..., 3:ERROR_DIM]
    noise = np.empty(batch + (N_SIGMA, NOISE_DIM))
    noise[..., 0, :] = aug.noise_mean
    noise[..., 1:AUG_DIM + 1, :] = noise0 + cols[..., ERROR_DIM:]
    noise[..., AUG_DIM + 1:, :] = noise0 - cols[..., ERROR_DIM:]
    wm, wc = tuning.weights()
    return SigmaPointSet(NavState(pts), noise, wm, wc)


def weighted_moments(points: NavState, wm: Array, wc: Array) -> tuple[NavState, Array]:
    """Manifold mean (eigenvector quaternion mean + weighted sum) and covariance of sigma points."""
    q = geo.quat_weighted_mean(points.q, wm)
    rest = (wm @ points.rest[..., :, :])
    mean = NavState(np.concatenate([q, rest], axis=-1))
    dev = points.boxminus(NavState(mean.data[..., None, :]))
    return mean, _weighted_outer(wc, dev, dev)


def _weighted_outer(w: Array, a: Array, b: Array) -> Array:
    """``sum_j w_j a_j b_j^T`` over the sigma axis (second to last)."""
    return np.swapaxes(a * w[:, None], -1, -2) @ b


def time_update(sigma: SigmaPointSet, u: ImuSample, world: WorldParams, bias_noise: ImuNoiseParams,
                dT: float | None = None) -> tuple[UkfMoments, NavState]:
    """Propagate every sigma point through the state transition and recombine.

    Returns the predicted moments (covariance includes the bias random walk) and
    the propagated points, which the measurement update reuses.
    """
    pts = sigma.points
    omega = u.omega_m - pts.b_omega - sigma.noise[..., :3]
    acc = u.acc_m - pts.b_acc - sigma.noise[..., 3:]
    propagated = propagate_exact(pts, omega, acc, world, dT)
    mean, cov = weighted_moments(propagated, sigma.weights_m, sigma.weights_c)
    cov = cov + bias_noise.C_w
    return UkfMoments(mean, 0.5 * (cov + np.swapaxes(cov, -1, -2))), propagated


def _cho_solve(L: Array, B: Array) -> Array:
    """Solve ``L L^T X = B`` for every matrix in the batch."""
    flatL = L.reshape((-1,) + L.shape[-2:])
    flatB = np.broadcast_to(B, L.shape[:-2] + B.shape[-2:]).reshape((-1,) + B.shape[-2:])
    out = np.empty(flatB.shape)
    for i in range(flatL.shape[0]):
        out[i], info = lapack.dpotrs(flatL[i], flatB[i], lower=1)
        if info:
            raise PreconditionError(f"dpotrs failed with info={info}")
    return out.reshape(L.shape[:-2] + B.shape[-2:])


def measurement_update(pred: UkfMoments, propagated: NavState, weights: tuple[Array, Array], z: ArrayLike,
                       f_w: ArrayLike, C_f: ArrayLike) -> tuple[UkfMoments, Array, Array]:
    """Landmark update of the predicted moments.

    Returns ``(posterior, z_hat, P_zz)``. The gain is ``P_xz P_zz^-1``, computed
    through the Cholesky factor of ``P_zz``.
    """
    wm, wc = weights
    z = np.asarray(z, dtype=float)
    if z.shape[-1] == 0:
        raise PreconditionError("measurement_update needs at least one landmark; skip the update instead")
    Z = landmark_h(propagated, f_w)
    z_hat = wm @ Z
    dZ = Z - z_hat[..., None, :]
    P_zz = _weighted_outer(wc, dZ, dZ) + np.asarray(C_f, dtype=float)
    dX = propagated.boxminus(NavState(pred.mean.data[..., None, :]))
    P_xz = _weighted_outer(wc, dX, dZ)
    K = np.swapaxes(_cho_solve(geo.cholesky(P_zz), np.swapaxes(P_xz, -1, -2)), -1, -2)
    # K P_zz K^T = P_xz K^T
    cov = pred.cov - P_xz @ np.swapaxes(K, -1, -2)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    delta = (K @ (z - z_hat)[..., None])[..., 0]
    return UkfMoments(pred.mean.boxplus(delta), cov), z_hat, P_zz
