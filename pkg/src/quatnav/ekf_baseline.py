"""Error-state (multiplicative) EKF over the same state, kinematics and landmark model, plus dead-reckoning.

The attitude error is the world-frame (left) perturbation used everywhere else in
the package, ``q = q_r(dr) (x) q_hat``, and the error-state ordering is
``[dr, dp, dv, db_omega, db_acc]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import geometry as geo
from .errors import FilterStepError, NotPositiveDefiniteError, PreconditionError
from .kinematics import ERROR_DIM, ImuSample, NavState, WorldParams, propagate_exact
from .qupf import Estimate, FilterConfig, align_frames, check_imu_times
from .sensing import ImuNoiseParams, LandmarkFrame, landmark_h

Array = NDArray[np.float64]


@dataclass
class EkfState:
    mean: NavState
    cov: Array


def right_jacobian(phi: ArrayLike) -> Array:
    """Right Jacobian of SO(3): ``Exp(phi + d) ~ Exp(phi) Exp(J_r(phi) d)``."""
    phi = np.asarray(phi, dtype=float)
    a = float(np.linalg.norm(phi))
    K = geo.skew(phi)
    if a < 1e-5:
        return np.eye(3) - 0.5 * K + K @ K / 6.0
    return np.eye(3) - (1.0 - np.cos(a)) / a**2 * K + (a - np.sin(a)) / a**3 * (K @ K)


def _rates(mean: NavState, u: ImuSample) -> tuple[Array, Array]:
    return u.omega_m - mean.b_omega, u.acc_m - mean.b_acc


def transition_jacobians(mean: NavState, u: ImuSample, world: WorldParams, dT: float | None = None) -> tuple[Array, Array]:
    """``(F, G)``: error-state transition (15x15) and noise input (15x6, columns ``[n_omega, n_acc]``)."""
    dT = world.dT if dT is None else dT
    omega, acc = _rates(mean, u)
    R = geo.quat_to_rotmat(mean.q)
    R_next = R @ geo.rotvec_to_rotmat(omega * dT)
    Ra = geo.skew(R @ acc)
    att_b = -R_next @ right_jacobian(omega * dT) * dT
    F = np.eye(ERROR_DIM)
    F[0:3, 9:12] = att_b
    F[3:6, 0:3] = -0.5 * dT * dT * Ra
    F[3:6, 6:9] = dT * np.eye(3)
    F[3:6, 12:15] = -0.5 * dT * dT * R
    F[6:9, 0:3] = -dT * Ra
    F[6:9, 12:15] = -dT * R
    G = np.zeros((ERROR_DIM, 6))
    G[0:3, 0:3] = att_b
    G[3:6, 3:6] = -0.5 * dT * dT * R
    G[6:9, 3:6] = -dT * R
    return F, G


def ekf_predict(state: EkfState, u: ImuSample, noise: ImuNoiseParams, world: WorldParams,
                dT: float | None = None) -> EkfState:
    """Propagate the mean exactly and the covariance with ``F P F^T + G C_x G^T + C_w``.

    ``C_x`` holds per-sample measurement noise, so ``G`` already carries the step
    length and no extra ``dT`` factor is applied.
    """
    omega, acc = _rates(state.mean, u)
    F, G = transition_jacobians(state.mean, u, world, dT)
    mean = propagate_exact(state.mean, omega, acc, world, dT)
    cov = F @ state.cov @ F.T + G @ noise.C_x @ G.T + noise.C_w
    return EkfState(mean, 0.5 * (cov + cov.T))


def measurement_jacobian(mean: NavState, f_w: ArrayLike) -> Array:
    """``H`` (3m x 15): ``d f_b / d dr = R^T [f_w - p]x``, ``d f_b / d dp = -R^T``."""
    f_w = np.asarray(f_w, dtype=float).reshape(-1, 3)
    R = geo.quat_to_rotmat(mean.q)
    H = np.zeros((3 * len(f_w), ERROR_DIM))
    for i, fw in enumerate(f_w):
        H[3 * i:3 * i + 3, 0:3] = R.T @ geo.skew(fw - mean.p)
        H[3 * i:3 * i + 3, 3:6] = -R.T
    return H


def ekf_update(state: EkfState, frame: LandmarkFrame, C_f: ArrayLike) -> EkfState:
    """Standard EKF landmark update with a boxplus correction and Joseph-form covariance."""
    if len(frame) == 0:
        raise PreconditionError("ekf_update needs at least one landmark; skip the update instead")
    C_f = np.asarray(C_f, dtype=float)
    H = measurement_jacobian(state.mean, frame.f_w)
    P = state.cov
    S = H @ P @ H.T + C_f
    L = geo.cholesky(S)
    PHt = P @ H.T
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    innov = frame.z - landmark_h(state.mean, frame.f_w)
    A = np.eye(ERROR_DIM) - K @ H
    cov = A @ P @ A.T + K @ C_f @ K.T
    return EkfState(state.mean.boxplus(K @ innov), 0.5 * (cov + cov.T))


def run_ekf(imu_stream, landmark_stream: Iterable[LandmarkFrame], config: FilterConfig) -> list[Estimate]:
    """EKF over a whole stream with the same initialization and frame alignment as the particle filter."""
    times = np.asarray(imu_stream.t, dtype=float)
    check_imu_times(times)
    frames = align_frames(times, list(landmark_stream))
    state = EkfState(config.init_mean.copy(), np.array(config.init_cov, dtype=float))
    out = []
    for k in range(len(times)):
        try:
            if k > 0:
                state = ekf_predict(state, imu_stream[k - 1], config.imu_noise, config.world, times[k] - times[k - 1])
            frame = frames.get(k)
            if frame is not None:
                state = ekf_update(state, frame, config.landmark_noise.cov(3 * len(frame)))
        except NotPositiveDefiniteError as exc:
            raise FilterStepError(k, None, exc) from exc
        out.append(Estimate(float(times[k]), state.mean.copy(), float("nan"), False))
    return out


def run_deadreckon(imu_stream, config: FilterConfig) -> list[Estimate]:
    """Integrate the bias-corrected IMU from the initial mean with no corrections."""
    times = np.asarray(imu_stream.t, dtype=float)
    check_imu_times(times)
    mean = config.init_mean.copy()
    out = [Estimate(float(times[0]), mean, float("nan"), False)] if len(times) else []
    for k in range(1, len(times)):
        omega, acc = _rates(mean, imu_stream[k - 1])
        mean = propagate_exact(mean, omega, acc, config.world, times[k] - times[k - 1])
        out.append(Estimate(float(times[k]), mean, float("nan"), False))
    return out
