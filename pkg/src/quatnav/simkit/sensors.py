"""Noisy IMU and landmark synthesis from a truth trajectory."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .. import geometry as geo
from ..kinematics import ImuStream, NavState
from ..sensing import ImuNoiseParams, LandmarkFrame, LandmarkNoise, imu_forward_model, psd_sqrt
from .trajectory import TrajectorySpec

Array = NDArray[np.float64]

_IMU_STREAM, _LANDMARK_STREAM = 0, 1


def synthesize_sensors(t: Array, truth: NavState, true_rates: tuple[Array, Array], noise: ImuNoiseParams,
                       landmark: LandmarkNoise, spec: TrajectorySpec, seed: int,
                       initial_bias: tuple[ArrayLike, ArrayLike] = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
                       ) -> tuple[ImuStream, list[LandmarkFrame], Array]:
    """IMU samples with random-walk biases and one landmark frame per camera instant.

    Returns ``(imu, frames, biases)`` where ``biases`` is the ``(N, 6)`` true
    ``[b_omega, b_acc]`` at each IMU sample. IMU noise and landmark draws use
    two independent streams derived from ``seed``.
    """
    omega, acc = true_rates
    imu_rng = np.random.default_rng([seed, _IMU_STREAM])
    lm_rng = np.random.default_rng([seed, _LANDMARK_STREAM])
    bias = tuple(np.asarray(b, dtype=float) for b in initial_bias)
    n = len(t)
    w_m, a_m, biases = np.empty((n, 3)), np.empty((n, 3)), np.empty((n, 6))
    for k in range(n):
        biases[k] = np.concatenate(bias)
        sample, bias = imu_forward_model(omega[k], acc[k], bias, noise, imu_rng, float(t[k]))
        w_m[k], a_m[k] = sample.omega_m, sample.acc_m

    lo, hi = np.asarray(spec.landmark_box, dtype=float)
    m = spec.landmark_count
    S = psd_sqrt(landmark.cov(3 * m)) if m else np.zeros((0, 0))
    R = geo.quat_to_rotmat(truth.q)
    frames = []
    next_id = 0
    for j, k in enumerate(range(0, n, spec.cam_stride)):
        f_w = lo + (hi - lo) * lm_rng.random((m, 3))
        f_b = (f_w - truth.p[k]) @ R[k]
        f_b = f_b + (S @ lm_rng.standard_normal(3 * m)).reshape(m, 3)
        frames.append(LandmarkFrame(float(t[k]), np.arange(next_id, next_id + m), f_w, f_b))
        next_id += m
    return ImuStream(t, w_m, a_m), frames, biases
