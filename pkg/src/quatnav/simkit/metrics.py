"""Estimation errors against ground truth and their summary statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import NDArray

from .. import geometry as geo
from ..errors import PreconditionError
from ..kinematics import NavState

Array = NDArray[np.float64]

TIME_TOL = 1e-9


@dataclass(frozen=True)
class ErrorRecord:
    t: float
    r_e: Array
    p_e: Array
    v_e: Array

    @property
    def r_norm(self) -> float:
        return float(np.linalg.norm(self.r_e))

    @property
    def p_norm(self) -> float:
        return float(np.linalg.norm(self.p_e))

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v_e))


@dataclass
class ErrorTable:
    """Column-wise errors for a whole run; ``r_e = q - q_hat`` via the quaternion boxminus."""

    t: Array
    r_e: Array
    p_e: Array
    v_e: Array

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> ErrorRecord:
        return ErrorRecord(float(self.t[k]), self.r_e[k], self.p_e[k], self.v_e[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def r_norm(self) -> Array:
        return np.linalg.norm(self.r_e, axis=-1)

    @property
    def p_norm(self) -> Array:
        return np.linalg.norm(self.p_e, axis=-1)

    @property
    def v_norm(self) -> Array:
        return np.linalg.norm(self.v_e, axis=-1)


@dataclass(frozen=True)
class ErrorSummary:
    rmse_r: float
    rmse_p: float
    rmse_v: float
    final_r: float
    final_p: float
    final_v: float
    convergence_time_p: float | None
    convergence_time_r: float | None
    window_start: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_errors(truth_t: Array, truth: NavState, est_t: Array, est: NavState) -> ErrorTable:
    truth_t = np.asarray(truth_t, dtype=float)
    est_t = np.asarray(est_t, dtype=float)
    if truth_t.shape != est_t.shape:
        raise PreconditionError(f"truth has {truth_t.shape[0]} samples, estimates {est_t.shape[0]}")
    bad = np.nonzero(np.abs(truth_t - est_t) > TIME_TOL)[0]
    if bad.size:
        k = int(bad[0])
        raise PreconditionError(f"timestamp mismatch at index {k}: truth {truth_t[k]!r}, estimate {est_t[k]!r}")
    return ErrorTable(est_t.copy(), geo.boxminus_qq(truth.q, est.q), truth.p - est.p, truth.v - est.v)


def rms(x: Array) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(np.square(x)))) if x.size else float("nan")


def convergence_time(t: Array, norm: Array, threshold: float) -> float | None:
    """First time after which ``norm`` stays strictly below ``threshold``; ``None`` if it never settles."""
    above = np.nonzero(np.asarray(norm) >= threshold)[0]
    if above.size == 0:
        return float(t[0]) if len(t) else None
    k = int(above[-1]) + 1
    return float(t[k]) if k < len(t) else None


def summarize(table: ErrorTable, transient: float = 0.0, threshold_p: float = 0.1,
              threshold_r: float = 0.05) -> ErrorSummary:
    """RMSE of the error norms over ``t >= t_0 + transient``, final errors, convergence times.

    A run shorter than the transient is summarized over its whole length;
    ``window_start`` reports the window actually used.
    """
    if len(table) == 0:
        raise PreconditionError("no errors to summarize")
    start = float(table.t[0]) + transient
    w = table.t >= start
    if not np.any(w):
        start, w = float(table.t[0]), np.ones(len(table), dtype=bool)
    return ErrorSummary(
        rmse_r=rms(table.r_norm[w]), rmse_p=rms(table.p_norm[w]), rmse_v=rms(table.v_norm[w]),
        final_r=float(table.r_norm[-1]), final_p=float(table.p_norm[-1]), final_v=float(table.v_norm[-1]),
        convergence_time_p=convergence_time(table.t, table.p_norm, threshold_p),
        convergence_time_r=convergence_time(table.t, table.r_norm, threshold_r),
        window_start=start,
    )
