"""Continuous 6-DoF navigation kinematics and its exact zero-order-hold discretization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels as _k
from . import geometry as geo

Array = NDArray[np.float64]

STATE_DIM = 16
ERROR_DIM = 15
GRAVITY = (0.0, 0.0, -9.81)


class NavState:
    """Navigation state ``[q, p, v, b_omega, b_acc]`` backed by a ``(..., 16)`` array.

    Leading axes form a batch, so one object can hold a whole particle ensemble
    or a full trajectory. The error-space ordering used by :meth:`boxplus` and
    :meth:`boxminus` is ``[dr, dp, dv, db_omega, db_acc]`` (15 values), with the
    attitude error applied on the left: ``q = q_r(dr) (x) q_hat``.
    """

    __slots__ = ("data",)

    def __init__(self, data: ArrayLike) -> None:
        data = np.asarray(data, dtype=float)
        if data.shape[-1:] != (STATE_DIM,):
            raise ValueError(f"NavState needs a trailing axis of {STATE_DIM}, got {data.shape}")
        self.data = data

    @classmethod
    def from_parts(cls, q=geo.Q_IDENTITY, p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0),
                   b_omega=(0.0, 0.0, 0.0), b_acc=(0.0, 0.0, 0.0)) -> "NavState":
        parts = [np.asarray(x, dtype=float) for x in (q, p, v, b_omega, b_acc)]
        shape = np.broadcast_shapes(*(x.shape[:-1] for x in parts))
        parts = [np.broadcast_to(x, shape + x.shape[-1:]) for x in parts]
        parts[0] = geo.canonicalize(parts[0])
        return cls(np.concatenate(parts, axis=-1))

    @property
    def q(self) -> Array:
        return self.data[..., 0:4]

    @property
    def p(self) -> Array:
        return self.data[..., 4:7]

    @property
    def v(self) -> Array:
        return self.data[..., 7:10]

    @property
    def b_omega(self) -> Array:
        return self.data[..., 10:13]

    @property
    def b_acc(self) -> Array:
        return self.data[..., 13:16]

    @property
    def rest(self) -> Array:
        """Non-attitude block ``[p, v, b_omega, b_acc]`` (12 values)."""
        return self.data[..., 4:]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape[:-1]

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, idx) -> "NavState":
        return NavState(self.data[idx])

    def __repr__(self) -> str:
        if self.shape == ():
            return (f"NavState(q={self.q.tolist()}, p={self.p.tolist()}, v={self.v.tolist()}, "
                    f"b_omega={self.b_omega.tolist()}, b_acc={self.b_acc.tolist()})")
        return f"NavState(batch={self.shape})"

    def copy(self) -> "NavState":
        return NavState(self.data.copy())

    def boxplus(self, delta: ArrayLike) -> "NavState":
        delta = np.asarray(delta, dtype=float)
        q = geo.boxplus(self.q, delta[..., :3])
        rest = self.rest + delta[..., 3:]
        return NavState(np.concatenate([q, np.broadcast_to(rest, q.shape[:-1] + (12,))], axis=-1))

    def boxminus(self, other: "NavState") -> Array:
        dr = geo.boxminus_qq(self.q, other.q)
        return np.concatenate([dr, np.broadcast_to(self.rest - other.rest, dr.shape[:-1] + (12,))], axis=-1)

    def to_chart(self) -> Array:
        """``x^{q2r}``: replace the quaternion with its rotation vector (15 values)."""
        return np.concatenate([geo.quat_to_rotvec(self.q), self.rest], axis=-1)

    @classmethod
    def from_chart(cls, x: ArrayLike) -> "NavState":
        """``x^{r2q}``: inverse of :meth:`to_chart`."""
        x = np.asarray(x, dtype=float)
        return cls(np.concatenate([geo.rotvec_to_quat(x[..., :3]), x[..., 3:]], axis=-1))


@dataclass(frozen=True)
class ImuSample:
    """One IMU measurement: body angular rate (rad/s) and specific force (m/s^2)."""

    t: float
    omega_m: Array
    acc_m: Array

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega_m", np.asarray(self.omega_m, dtype=float))
        object.__setattr__(self, "acc_m", np.asarray(self.acc_m, dtype=float))


@dataclass(frozen=True)
class ImuStream:
    """A time-ordered IMU record stored column-wise; indexing yields :class:`ImuSample`."""

    t: Array
    omega_m: Array
    acc_m: Array

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float).reshape(-1)
        omega = np.asarray(self.omega_m, dtype=float).reshape(-1, 3)
        acc = np.asarray(self.acc_m, dtype=float).reshape(-1, 3)
        if not (len(t) == len(omega) == len(acc)):
            raise ValueError("t, omega_m and acc_m must have the same length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega_m", omega)
        object.__setattr__(self, "acc_m", acc)

    @classmethod
    def from_samples(cls, samples) -> "ImuStream":
        samples = list(samples)
        return cls([s.t for s in samples], np.reshape([s.omega_m for s in samples], (-1, 3)),
                   np.reshape([s.acc_m for s in samples], (-1, 3)))

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> ImuSample:
        return ImuSample(float(self.t[k]), self.omega_m[k], self.acc_m[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))


@dataclass(frozen=True)
class WorldParams:
    gravity: Array = field(default_factory=lambda: np.array(GRAVITY))
    dT: float = 0.005

    def __post_init__(self) -> None:
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))
        if not self.dT > 0.0:
            raise ValueError("dT must be positive")


def gamma(omega: ArrayLike) -> Array:
    """The 4x4 generator ``[[0, -w^T], [w, -[w]x]]`` so that ``q_dot = Gamma(w) q / 2``."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape[:-1] + (4, 4))
    out[..., 0, 1:] = -omega
    out[..., 1:, 0] = omega
    out[..., 1:, 1:] = -geo.skew(omega)
    return out


def _gamma_times(omega: Array, q: Array) -> Array:
    # Gamma(w) q without forming the matrix
    w, v = q[..., :1], q[..., 1:]
    head = -np.sum(omega * v, axis=-1, keepdims=True)
    tail = w * omega - np.cross(omega, v)
    return np.concatenate([head, tail], axis=-1)


def continuous_derivative(state: NavState, omega: ArrayLike, acc: ArrayLike, world: WorldParams):
    """Right-hand side of the continuous kinematics: ``(q_dot, p_dot, v_dot)``."""
    omega = np.asarray(omega, dtype=float)
    acc = np.asarray(acc, dtype=float)
    q_dot = 0.5 * _gamma_times(omega, state.q)
    p_dot = state.v.copy()
    v_dot = world.gravity + (geo.quat_to_rotmat(state.q) @ acc[..., None])[..., 0]
    return q_dot, p_dot, v_dot


def attitude_transition(q: ArrayLike, omega: ArrayLike, dT: float) -> Array:
    """Closed form of ``exp(Gamma(w) dT / 2) q``."""
    return geo._rowwise(_k.attitude_transition, (4,), q, omega, extra=(float(dT),))


def propagate_exact(state: NavState, omega: ArrayLike, acc: ArrayLike, world: WorldParams,
                    dT: float | None = None) -> NavState:
    """One exact zero-order-hold step with inputs and attitude frozen at the step start.

    ``omega`` and ``acc`` are the already bias- and noise-corrected rates. The
    biases are copied unchanged.
    """
    dT = world.dT if dT is None else dT
    acc = np.asarray(acc, dtype=float)
    q_next = attitude_transition(state.q, omega, dT)
    c = world.gravity + (geo.quat_to_rotmat(state.q) @ acc[..., None])[..., 0]
    p_next = state.p + dT * state.v + (0.5 * dT * dT) * c
    v_next = state.v + dT * c
    shape = q_next.shape[:-1]
    biases = np.broadcast_to(state.data[..., 10:], shape + (6,))
    return NavState(np.concatenate([q_next, np.broadcast_to(p_next, shape + (3,)),
                                    np.broadcast_to(v_next, shape + (3,)), biases], axis=-1))


def generator_matrix(state: NavState, omega: ArrayLike, acc: ArrayLike, world: WorldParams) -> Array:
    """The 11x11 block generator acting on ``[q; p; v; 1]`` (single state only)."""
    M = np.zeros((11, 11))
    M[0:4, 0:4] = 0.5 * gamma(omega)
    M[4:7, 7:10] = np.eye(3)
    M[7:10, 10] = world.gravity + geo.quat_to_rotmat(state.q) @ np.asarray(acc, dtype=float)
    return M
