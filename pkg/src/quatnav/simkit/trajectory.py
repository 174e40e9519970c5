"""Analytic test trajectories with exact body-frame rates.

Attitude is parameterized by yaw-pitch-roll angles (``R = Rz(yaw) Ry(pitch) Rx(roll)``)
so the body angular rate follows in closed form from the angle derivatives.
Rates are reported in zero-order-hold form: sample ``k`` carries the rates that,
held constant over ``[t_k, t_k+1)`` and integrated with the exact discretization,
reproduce the analytic truth. The body rate is the exact attitude increment
``log(q_k^-1 q_k+1) / dT``; the world acceleration is taken at the step midpoint
and rotated into the body frame with the attitude at ``t_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .. import geometry as geo
from ..errors import PreconditionError
from ..kinematics import GRAVITY, NavState

Array = NDArray[np.float64]

MOTIONS = ("figure-eight", "circle", "hover-then-dash")


@dataclass(frozen=True)
class TrajectorySpec:
    duration: float = 60.0
    imu_rate: int = 200
    cam_rate: int = 20
    motion: str = "figure-eight"
    amplitude: float = 2.0  # m
    angular_amplitude: float = 0.5  # rad
    period: float = 20.0  # s, one lap
    height: float = 1.0  # m
    landmark_count: int = 20
    landmark_box: tuple[tuple[float, float, float], tuple[float, float, float]] = ((-6.0, -6.0, -1.0), (6.0, 6.0, 4.0))
    gravity: tuple[float, float, float] = GRAVITY

    def __post_init__(self) -> None:
        if self.motion not in MOTIONS:
            raise PreconditionError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if self.duration <= 0 or self.period <= 0:
            raise PreconditionError("duration and period must be positive")
        if self.imu_rate <= 0 or self.cam_rate <= 0 or self.imu_rate % self.cam_rate:
            raise PreconditionError("imu_rate must be a positive integer multiple of cam_rate")
        if self.landmark_count < 0:
            raise PreconditionError("landmark_count must be non-negative")
        lo, hi = np.asarray(self.landmark_box, dtype=float)
        if lo.shape != (3,) or np.any(hi < lo):
            raise PreconditionError("landmark_box must be ((xmin, ymin, zmin), (xmax, ymax, zmax))")

    @property
    def n_imu(self) -> int:
        return int(round(self.duration * self.imu_rate))

    @property
    def cam_stride(self) -> int:
        return self.imu_rate // self.cam_rate


@dataclass
class Motion:
    """Position, velocity, acceleration and Euler angles (with first derivatives) at times ``t``."""

    p: Array
    v: Array
    a: Array
    euler: Array  # (N, 3) roll, pitch, yaw
    euler_dot: Array


def _sin_terms(t: Array, amp: float, w: float):
    # amp * sin(w t) and its first two derivatives
    s, c = np.sin(w * t), np.cos(w * t)
    return amp * s, amp * w * c, -amp * w * w * s


def _motion(spec: TrajectorySpec, t: Array) -> Motion:
    t = np.asarray(t, dtype=float)
    n = t.shape[0]
    w = 2.0 * np.pi / spec.period
    A, ang = spec.amplitude, spec.angular_amplitude
    p, v, a = np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3))
    e, ed = np.zeros((n, 3)), np.zeros((n, 3))
    if spec.motion == "figure-eight":
        p[:, 0], v[:, 0], a[:, 0] = _sin_terms(t, A, w)
        p[:, 1], v[:, 1], a[:, 1] = _sin_terms(t, 0.5 * A, 2.0 * w)
        p[:, 2], v[:, 2], a[:, 2] = _sin_terms(t, 0.2 * A, w)
        p[:, 2] += spec.height
        e[:, 0], ed[:, 0], _ = _sin_terms(t, 0.3 * ang, 2.0 * w)
        e[:, 1], ed[:, 1], _ = _sin_terms(t + 0.25 * spec.period, 0.3 * ang, w)
        e[:, 2], ed[:, 2], _ = _sin_terms(t, ang, w)
    elif spec.motion == "circle":
        p[:, 0], v[:, 0], a[:, 0] = _sin_terms(t + 0.25 * spec.period, A, w)
        p[:, 1], v[:, 1], a[:, 1] = _sin_terms(t, A, w)
        p[:, 2] = spec.height
        e[:, 2] = w * t + 0.5 * np.pi  # nose along the velocity
        ed[:, 2] = w
    else:  # hover-then-dash
        t0 = 0.5 * spec.duration
        tau = np.clip((t - t0) / (spec.duration - t0), 0.0, 1.0)
        live = (t > t0) & (t < spec.duration)
        scale = 1.0 / (spec.duration - t0)
        s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
        s1 = np.where(live, 30.0 * tau**2 * (1.0 - tau) ** 2, 0.0) * scale
        s2 = np.where(live, 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau), 0.0) * scale**2
        p[:, 0], v[:, 0], a[:, 0] = A * s, A * s1, A * s2
        p[:, 2] = spec.height
    return Motion(p, v, a, e, ed)


def euler_to_quat(euler: Array) -> Array:
    """Quaternion of ``Rz(yaw) Ry(pitch) Rx(roll)`` for rows ``[roll, pitch, yaw]``."""
    euler = np.asarray(euler, dtype=float)
    z = np.zeros(euler.shape[:-1])
    qx = geo.rotvec_to_quat(np.stack([euler[..., 0], z, z], axis=-1))
    qy = geo.rotvec_to_quat(np.stack([z, euler[..., 1], z], axis=-1))
    qz = geo.rotvec_to_quat(np.stack([z, z, euler[..., 2]], axis=-1))
    return geo.quat_product(qz, geo.quat_product(qy, qx))


def euler_body_rate(euler: Array, euler_dot: Array) -> Array:
    """Body-frame angular velocity for yaw-pitch-roll angles and their rates."""
    phi, theta = euler[..., 0], euler[..., 1]
    dphi, dtheta, dpsi = euler_dot[..., 0], euler_dot[..., 1], euler_dot[..., 2]
    return np.stack([
        dphi - dpsi * np.sin(theta),
        dtheta * np.cos(phi) + dpsi * np.cos(theta) * np.sin(phi),
        -dtheta * np.sin(phi) + dpsi * np.cos(theta) * np.cos(phi),
    ], axis=-1)


def imu_times(spec: TrajectorySpec) -> Array:
    return np.arange(spec.n_imu) / spec.imu_rate


def generate_trajectory(spec: TrajectorySpec) -> tuple[Array, NavState, tuple[Array, Array]]:
    """Truth at the IMU times and the zero-order-hold rates for each step.

    Returns ``(t, truth, (omega, acc))`` with ``truth`` a batched :class:`NavState`
    (zero biases) of length ``duration * imu_rate`` and ``omega``/``acc`` of
    shape ``(N, 3)``; row ``k`` drives the step from ``t_k`` to ``t_k+1``.
    """
    t = imu_times(spec)
    m = _motion(spec, t)
    q = euler_to_quat(m.euler)
    truth = NavState.from_parts(q=q, p=m.p, v=m.v, b_omega=np.zeros((len(t), 3)), b_acc=np.zeros((len(t), 3)))
    dT = 1.0 / spec.imu_rate
    # the body rate that carries q_k exactly onto q_k+1 under a frozen-rate step
    q_next = euler_to_quat(_motion(spec, t + dT).euler)
    omega = geo.quat_to_rotvec(geo.quat_product(geo.quat_inverse(q), q_next)) / dT
    mid = _motion(spec, t + 0.5 * dT)
    R = geo.quat_to_rotmat(q)
    g = np.asarray(spec.gravity, dtype=float)
    acc = np.einsum("nji,nj->ni", R, mid.a - g)
    return t, truth, (omega, acc)


def instantaneous_rates(spec: TrajectorySpec, t: Array) -> tuple[Array, Array]:
    """Analytic body rate and specific force at the given instants (no hold correction)."""
    m = _motion(spec, t)
    R = geo.quat_to_rotmat(euler_to_quat(m.euler))
    g = np.asarray(spec.gravity, dtype=float)
    return euler_body_rate(m.euler, m.euler_dot), np.einsum("nji,nj->ni", R, m.a - g)
