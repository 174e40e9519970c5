"""TOML configuration for filter runs and simulations.

Unknown keys anywhere are errors, so a misspelled tuning name cannot be
silently ignored. See the README for the full schema.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import geometry as geo
from .errors import ConfigError
from .kinematics import GRAVITY, NavState, WorldParams
from .qukf import UkfTuning
from .qupf import PROPOSAL_MODES, FilterConfig
from .sensing import ImuNoiseParams, LandmarkNoise
from .simkit.dataset import Trajectory, interpolate_trajectory
from .simkit.trajectory import MOTIONS, TrajectorySpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FILTERS = ("qupf", "ekf", "deadreckon")
BUILTIN = "builtin:"

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]
Spread = Union[float, Vec3]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class QupfSection(_Section):
    particles: int = Field(50, ge=1)
    ess_threshold: Optional[float] = Field(None, gt=0)
    epsilon: float = Field(1e-12, gt=0)
    proposal_mode: Literal[PROPOSAL_MODES] = "standard-upf"  # type: ignore[valid-type]


class UkfSection(_Section):
    lambda_: float = Field(1.0, alias="lambda")
    alpha: float = 1.0
    beta: float = 2.0


class WorldSection(_Section):
    gravity: Vec3 = GRAVITY
    dt: float = Field(0.005, gt=0)


class ImuNoiseSection(_Section):
    """Per-sample standard deviations (scalar or per-axis) or full 3x3 covariances.

    The bias entries describe the random-walk increment per IMU sample.
    """

    gyro_sigma: Optional[Spread] = None
    acc_sigma: Optional[Spread] = None
    gyro_bias_sigma: Optional[Spread] = None
    acc_bias_sigma: Optional[Spread] = None
    gyro_cov: Optional[Mat3] = None
    acc_cov: Optional[Mat3] = None
    gyro_bias_cov: Optional[Mat3] = None
    acc_bias_cov: Optional[Mat3] = None

    @model_validator(mode="after")
    def _one_each(self):
        for name in ("gyro", "acc", "gyro_bias", "acc_bias"):
            if getattr(self, f"{name}_sigma") is not None and getattr(self, f"{name}_cov") is not None:
                raise ValueError(f"give {name}_sigma or {name}_cov, not both")
        return self

    def build(self) -> ImuNoiseParams:
        def cov(name: str):
            c = getattr(self, f"{name}_cov")
            if c is not None:
                return np.array(c, dtype=float)
            s = getattr(self, f"{name}_sigma")
            return np.square(np.asarray(0.0 if s is None else s, dtype=float))
        return ImuNoiseParams(cov("gyro"), cov("acc"), cov("gyro_bias"), cov("acc_bias"))


class LandmarkNoiseSection(_Section):
    sigma_f: float = Field(0.02, ge=0)


class InitSection(_Section):
    """Initial estimate and covariance.

    With ``from_truth`` the mean is the first ground-truth state moved by the
    given errors (attitude as ``q_hat = q (+) attitude_error``); otherwise
    ``q``, ``p`` and ``v`` are used as given.
    """

    from_truth: bool = True
    attitude_error: Vec3 = (0.0, 0.0, 0.0)
    position_error: Vec3 = (0.0, 0.0, 0.0)
    velocity_error: Vec3 = (0.0, 0.0, 0.0)
    q: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    p: Vec3 = (0.0, 0.0, 0.0)
    v: Vec3 = (0.0, 0.0, 0.0)
    b_omega: Vec3 = (0.0, 0.0, 0.0)
    b_acc: Vec3 = (0.0, 0.0, 0.0)
    sigma_attitude: Spread = 0.35
    sigma_position: Spread = 0.6
    sigma_velocity: Spread = 0.1
    sigma_b_omega: Spread = 0.01
    sigma_b_acc: Spread = 0.1

    @field_validator("q")
    @classmethod
    def _unit(cls, q):
        n = float(np.linalg.norm(q))
        if not abs(n - 1.0) <= 1e-6:
            raise ValueError(f"q must be a unit quaternion [w, x, y, z] (norm {n})")
        return q

    def covariance(self) -> np.ndarray:
        blocks = [self.sigma_attitude, self.sigma_position, self.sigma_velocity, self.sigma_b_omega, self.sigma_b_acc]
        diag = np.concatenate([np.broadcast_to(np.asarray(b, dtype=float), (3,)) for b in blocks])
        return np.diag(np.square(diag))

    def mean(self, truth0: NavState | None) -> NavState:
        if not self.from_truth:
            return NavState.from_parts(self.q, self.p, self.v, self.b_omega, self.b_acc)
        if truth0 is None:
            raise ConfigError("init.from_truth needs a dataset with ground truth")
        return NavState.from_parts(
            q=geo.boxplus(truth0.q, np.array(self.attitude_error)),
            p=truth0.p + np.array(self.position_error),
            v=truth0.v + np.array(self.velocity_error),
            b_omega=self.b_omega, b_acc=self.b_acc)


class ReportSection(_Section):
    transient: float = Field(10.0, ge=0)
    threshold_p: float = Field(0.1, gt=0)
    threshold_r: float = Field(0.05, gt=0)


class RunConfig(_Section):
    filter: Literal[FILTERS] = "qupf"  # type: ignore[valid-type]
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(0, ge=0)
    dataset: Optional[str] = None
    qupf: QupfSection = QupfSection()
    ukf: UkfSection = UkfSection()
    world: WorldSection = WorldSection()
    imu_noise: ImuNoiseSection = ImuNoiseSection()
    landmark_noise: LandmarkNoiseSection = LandmarkNoiseSection()
    init: InitSection = InitSection()
    report: ReportSection = ReportSection()

    def filter_config(self, truth: Trajectory | None, t0: float) -> FilterConfig:
        """Assemble the filter tunables; ``truth`` supplies the initial state at ``t0`` when requested."""
        truth0 = None
        if truth is not None and self.init.from_truth:
            truth0 = interpolate_trajectory(truth, np.array([t0])).states[0]
        if self.landmark_noise.sigma_f <= 0.0:
            raise ConfigError("landmark_noise.sigma_f must be positive for filtering")
        try:
            return FilterConfig(
                init_mean=self.init.mean(truth0),
                init_cov=self.init.covariance(),
                imu_noise=self.imu_noise.build(),
                landmark_noise=LandmarkNoise(sigma_f=self.landmark_noise.sigma_f),
                world=WorldParams(np.array(self.world.gravity), self.world.dt),
                m_p=self.qupf.particles,
                m_thr=self.qupf.ess_threshold,
                epsilon=self.qupf.epsilon,
                tuning=UkfTuning(self.ukf.lambda_, self.ukf.alpha, self.ukf.beta),
                proposal_mode=self.qupf.proposal_mode,
                seed=self.seed,
                threads=self.threads or None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


class TrajectorySection(_Section):
    duration: float = Field(60.0, gt=0)
    imu_rate: int = Field(200, gt=0)
    cam_rate: int = Field(20, gt=0)
    motion: Literal[MOTIONS] = "figure-eight"  # type: ignore[valid-type]
    amplitude: float = 2.0
    angular_amplitude: float = 0.5
    period: float = Field(20.0, gt=0)
    height: float = 1.0
    landmark_count: int = Field(20, ge=0)
    landmark_box: tuple[Vec3, Vec3] = ((-6.0, -6.0, -1.0), (6.0, 6.0, 4.0))
    gravity: Vec3 = GRAVITY


class ImuBiasSection(_Section):
    b_omega: Vec3 = (0.0, 0.0, 0.0)
    b_acc: Vec3 = (0.0, 0.0, 0.0)


class SimSpec(_Section):
    seed: int = Field(0, ge=0, lt=2**64)
    trajectory: TrajectorySection = TrajectorySection()
    imu_noise: ImuNoiseSection = ImuNoiseSection()
    imu_bias: ImuBiasSection = ImuBiasSection()
    landmark_noise: LandmarkNoiseSection = LandmarkNoiseSection()

    def trajectory_spec(self) -> TrajectorySpec:
        try:
            return TrajectorySpec(**self.trajectory.model_dump())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def landmark_noise_model(self) -> LandmarkNoise:
        s = self.landmark_noise.sigma_f
        m = self.trajectory.landmark_count
        return LandmarkNoise(sigma_f=s) if s > 0 else LandmarkNoise(C_f=np.zeros((3 * m, 3 * m)))


def _format_validation(exc: ValidationError, source: str) -> str:
    lines = [f"{source}: invalid configuration"]
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"])
        lines.append(f"  {where}: {err['msg']}")
    return "\n".join(lines)


def _parse(model, data: dict, source: str):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc, source)) from None


def _read_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_run_config(path) -> RunConfig:
    return _parse(RunConfig, _read_toml(path), str(path))


def parse_run_config(data: dict, source: str = "<config>") -> RunConfig:
    return _parse(RunConfig, data, source)


def load_sim_spec(path) -> SimSpec:
    return _parse(SimSpec, _read_toml(path), str(path))


def parse_sim_spec(data: dict, source: str = "<spec>") -> SimSpec:
    return _parse(SimSpec, data, source)


def preset_path(name: str) -> Path:
    """Path of a TOML preset shipped with the package (``benchmark``, ``qupf``, ``ekf``, ``deadreckon``)."""
    path = resources.files("quatnav") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"no built-in preset named {name!r}")
    return Path(str(path))


def resolve_path(arg: str) -> Path:
    """A file path, or ``builtin:NAME`` for a shipped preset."""
    return preset_path(arg[len(BUILTIN):]) if arg.startswith(BUILTIN) else Path(arg)
