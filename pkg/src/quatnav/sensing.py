"""IMU measurement model and the landmark measurement function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import geometry as geo
from .errors import PreconditionError
from .kinematics import ImuSample, NavState

Array = NDArray[np.float64]


def _as_cov(c: ArrayLike) -> Array:
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        return float(c) * np.eye(3)
    if c.shape == (3,):
        return np.diag(c)
    return c


def psd_sqrt(C: ArrayLike) -> Array:
    """Square-root factor ``S`` with ``S S^T = C`` for a PSD (possibly singular) matrix."""
    C = np.asarray(C, dtype=float)
    C = 0.5 * (C + C.T)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(C)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class ImuNoiseParams:
    """Per-sample IMU noise covariances.

    ``C_omega`` and ``C_acc`` are the white measurement noises; ``C_bomega`` and
    ``C_bacc`` the per-step bias random-walk increments. Scalars and 3-vectors
    are accepted and expanded to (diagonal) 3x3 matrices.
    """

    C_omega: Array
    C_acc: Array
    C_bomega: Array
    C_bacc: Array

    def __post_init__(self) -> None:
        for name in ("C_omega", "C_acc", "C_bomega", "C_bacc"):
            c = _as_cov(getattr(self, name))
            if c.shape != (3, 3):
                raise PreconditionError(f"{name} must be 3x3")
            if np.any(np.linalg.eigvalsh(0.5 * (c + c.T)) < -1e-12):
                raise PreconditionError(f"{name} is not positive semidefinite")
            object.__setattr__(self, name, c)

    @classmethod
    def from_sigmas(cls, gyro: float, acc: float, gyro_bias: float, acc_bias: float) -> "ImuNoiseParams":
        return cls(gyro**2, acc**2, gyro_bias**2, acc_bias**2)

    @classmethod
    def zero(cls) -> "ImuNoiseParams":
        return cls(0.0, 0.0, 0.0, 0.0)

    @property
    def C_x(self) -> Array:
        """Covariance of the augmented (non-additive) noise ``[n_omega, n_acc]``."""
        out = np.zeros((6, 6))
        out[:3, :3] = self.C_omega
        out[3:, 3:] = self.C_acc
        return out

    @property
    def C_w(self) -> Array:
        """Additive process noise in the 15-dim error space (bias random walks only)."""
        out = np.zeros((15, 15))
        out[9:12, 9:12] = self.C_bomega
        out[12:15, 12:15] = self.C_bacc
        return out


@dataclass(frozen=True)
class LandmarkFrame:
    """Matched landmark pairs observed at one camera instant.

    ``f_w`` (world, m) and ``f_b`` (body, m) are ``(m_f, 3)`` arrays in the same
    row order as ``ids``.
    """

    t: float
    ids: NDArray[np.int64]
    f_w: Array
    f_b: Array

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        f_w = np.asarray(self.f_w, dtype=float).reshape(-1, 3)
        f_b = np.asarray(self.f_b, dtype=float).reshape(-1, 3)
        if not (len(ids) == len(f_w) == len(f_b)):
            raise PreconditionError("ids, f_w and f_b must have the same length")
        if len(np.unique(ids)) != len(ids):
            raise PreconditionError(f"duplicate landmark ids in frame at t={self.t}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "f_w", f_w)
        object.__setattr__(self, "f_b", f_b)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def landmarks(self) -> list[tuple[int, Array, Array]]:
        return [(int(i), w, b) for i, w, b in zip(self.ids, self.f_w, self.f_b)]

    @property
    def z(self) -> Array:
        """Stacked body-frame measurement vector (length ``3 m_f``)."""
        return self.f_b.reshape(-1)


@dataclass(frozen=True)
class LandmarkNoise:
    """Landmark noise as an isotropic ``sigma_f`` or a full ``C_f``."""

    sigma_f: float | None = None
    C_f: Array | None = None

    def __post_init__(self) -> None:
        if (self.sigma_f is None) == (self.C_f is None):
            raise PreconditionError("give exactly one of sigma_f or C_f")
        if self.C_f is not None:
            object.__setattr__(self, "C_f", np.asarray(self.C_f, dtype=float))
        elif not self.sigma_f > 0.0:
            raise PreconditionError("sigma_f must be positive")

    def cov(self, m_z: int) -> Array:
        if self.C_f is None:
            return self.sigma_f**2 * np.eye(m_z)
        if self.C_f.shape != (m_z, m_z):
            raise PreconditionError(f"C_f has shape {self.C_f.shape}, frame needs {(m_z, m_z)}")
        return self.C_f


def landmark_h(state: NavState, f_w: ArrayLike) -> Array:
    """Predicted body-frame landmarks ``R(q)^T (f_w,i - p)``, stacked to ``(..., 3 m_f)``."""
    f_w = np.asarray(f_w, dtype=float).reshape(-1, 3)
    R = geo.quat_to_rotmat(state.q)
    d = f_w - state.p[..., None, :]
    fb = d @ R
    return fb.reshape(fb.shape[:-2] + (3 * f_w.shape[0],))


def imu_forward_model(true_omega: ArrayLike, true_acc: ArrayLike, bias_state, noise: ImuNoiseParams,
                      rng: np.random.Generator, t: float = 0.0):
    """Simulate one IMU sample and advance the bias random walk.

    Returns ``(ImuSample, (b_omega_next, b_acc_next))``. Noise is drawn from
    ``rng`` in the fixed order measurement-gyro, measurement-acc, gyro-bias,
    acc-bias.
    """
    b_omega, b_acc = (np.asarray(b, dtype=float) for b in bias_state)
    n_omega = psd_sqrt(noise.C_omega) @ rng.standard_normal(3)
    n_acc = psd_sqrt(noise.C_acc) @ rng.standard_normal(3)
    n_bomega = psd_sqrt(noise.C_bomega) @ rng.standard_normal(3)
    n_bacc = psd_sqrt(noise.C_bacc) @ rng.standard_normal(3)
    sample = ImuSample(t, np.asarray(true_omega) + b_omega + n_omega, np.asarray(true_acc) + b_acc + n_acc)
    return sample, (b_omega + n_bomega, b_acc + n_bacc)


def correct_inputs(u: ImuSample, bias, noise_part=(0.0, 0.0)):
    """Invert the IMU model: ``omega = omega_m - b_omega - n_omega`` and likewise for acc."""
    b_omega, b_acc = bias
    n_omega, n_acc = noise_part
    return u.omega_m - b_omega - n_omega, u.acc_m - b_acc - n_acc
