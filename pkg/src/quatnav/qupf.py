"""Quaternion unscented particle filter: one UKF per particle plus importance weighting and resampling.

The ensemble is stored as arrays with a leading particle axis. Per-particle work
(UKF prediction, measurement update, proposal sampling, density evaluation) is
mapped over particle chunks, optionally on a thread pool; normalization, ESS,
resampling and the weighted estimate run sequentially in a fixed order. Random
numbers come from counter-based Philox streams keyed by the seed and addressed
by ``(particle, step, purpose)``, so results do not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import geometry as geo
from .errors import (ConfigError, DatasetError, FilterStepError, NotPositiveDefiniteError, OrderingError,
                     PreconditionError, QuaternionMeanAmbiguityError)
from .kinematics import ERROR_DIM, ImuSample, NavState, WorldParams
from .qukf import UkfMoments, UkfTuning, augment, measurement_update, sigma_points, time_update
from .sensing import ImuNoiseParams, LandmarkFrame, LandmarkNoise, landmark_h

Array = NDArray[np.float64]

log = logging.getLogger(__name__)

PAPER_LITERAL = "paper-literal"
STANDARD_UPF = "standard-upf"
PROPOSAL_MODES = (PAPER_LITERAL, STANDARD_UPF)

THREADS_ENV = "QUATNAV_THREADS"

# stream purposes
_INIT, _PROPOSAL, _RESAMPLE = 1, 2, 3


@dataclass
class FilterConfig:
    """Every tunable of the particle filter (and the shared initialization of the baselines)."""

    init_mean: NavState
    init_cov: Array
    imu_noise: ImuNoiseParams
    landmark_noise: LandmarkNoise
    world: WorldParams = field(default_factory=WorldParams)
    m_p: int = 50
    m_thr: float | None = None
    epsilon: float = 1e-12
    tuning: UkfTuning = field(default_factory=UkfTuning)
    proposal_mode: str = STANDARD_UPF
    seed: int = 0
    threads: int | None = None

    def __post_init__(self) -> None:
        self.init_cov = np.asarray(self.init_cov, dtype=float)
        if self.init_cov.shape != (ERROR_DIM, ERROR_DIM):
            raise ConfigError(f"init_cov must be {ERROR_DIM}x{ERROR_DIM}")
        if self.m_p < 1:
            raise ConfigError("m_p must be at least 1")
        if self.m_thr is None:
            self.m_thr = self.m_p / 2.0
        if not 0.0 < self.m_thr <= self.m_p:
            raise ConfigError(f"m_thr must lie in (0, m_p], got {self.m_thr}")
        if not self.epsilon > 0.0:
            raise ConfigError("epsilon must be positive")
        if self.proposal_mode not in PROPOSAL_MODES:
            raise ConfigError(f"proposal_mode must be one of {PROPOSAL_MODES}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")


@dataclass
class Particle:
    ukf: UkfMoments
    sample: NavState
    weight: float


@dataclass
class Ensemble:
    """Struct-of-arrays particle ensemble.

    ``mean``/``cov`` are the per-particle UKF moments, ``samples`` the particles
    themselves. ``prior`` and ``points`` hold the latest prediction (moments and
    propagated sigma points) until an update consumes them.
    """

    mean: NavState
    cov: Array
    samples: NavState
    weights: Array
    step: int = 0
    prior: UkfMoments | None = None
    points: NavState | None = None

    def __len__(self) -> int:
        return self.weights.shape[0]

    def particle(self, i: int) -> Particle:
        return Particle(UkfMoments(self.mean[i], self.cov[i]), self.samples[i], float(self.weights[i]))


@dataclass(frozen=True)
class Estimate:
    t: float
    state: NavState
    ess: float
    resampled: bool


def substream(seed: int, purpose: int, step: int, particle: int) -> np.random.Generator:
    """Counter-based random stream for one ``(purpose, step, particle)`` cell."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, particle, step, purpose]))


def worker_count(config: FilterConfig) -> int:
    """Threads to use: the configured count (default: CPU count), capped by ``QUATNAV_THREADS`` and ``m_p``."""
    n = config.threads or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(n, config.m_p))


class _Mapper:
    """Run a function over contiguous particle chunks and concatenate the results in order."""

    def __init__(self, m_p: int, workers: int) -> None:
        self.chunks = [c for c in np.array_split(np.arange(m_p), workers) if len(c)]
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def __call__(self, fn: Callable, step: int) -> list[Array]:
        def guarded(idx: Array):
            try:
                return fn(idx)
            except (NotPositiveDefiniteError, QuaternionMeanAmbiguityError) as exc:
                bad = getattr(exc, "index", None)
                particle = int(idx[bad[0]]) if bad else None
                raise FilterStepError(step, particle, exc) from exc

        if self.pool is None:
            parts = [guarded(idx) for idx in self.chunks]
        else:
            parts = list(self.pool.map(guarded, self.chunks))
        return [np.concatenate(field_parts, axis=0) for field_parts in zip(*parts)]

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def _sample_states(mean: NavState, cov: Array, seed: int, purpose: int, step: int, particles: Array,
                   mode: str) -> NavState:
    """Draw one state per particle from ``N(mean_i, cov_i)`` on the error space."""
    L = geo.cholesky(cov)
    zeta = np.stack([substream(seed, purpose, step, int(i)).standard_normal(ERROR_DIM) for i in particles])
    delta = (L @ zeta[..., None])[..., 0]
    if mode == PAPER_LITERAL:
        return NavState.from_chart(mean.to_chart() + delta)
    return mean.boxplus(delta)


def _deviation(x: NavState, mean: NavState, mode: str) -> Array:
    if mode == PAPER_LITERAL:
        return x.to_chart() - mean.to_chart()
    return x.boxminus(mean)


def initialize(config: FilterConfig) -> Ensemble:
    """Draw the initial particles around ``init_mean`` and give each its own UKF."""
    m_p = config.m_p
    try:
        geo.cholesky(config.init_cov)
    except NotPositiveDefiniteError as exc:
        raise ConfigError(f"init_cov is not positive definite: {exc}") from exc
    mean0 = NavState(np.broadcast_to(config.init_mean.data, (m_p, 16)))
    cov0 = np.broadcast_to(config.init_cov, (m_p, ERROR_DIM, ERROR_DIM))
    samples = _sample_states(mean0, cov0, config.seed, _INIT, 0, np.arange(m_p), config.proposal_mode)
    return Ensemble(mean=samples.copy(), cov=np.array(cov0), samples=samples, weights=np.full(m_p, 1.0 / m_p))


def _predict_chunk(ens: Ensemble, u: ImuSample, config: FilterConfig, dT: float | None):
    def work(idx: Array):
        moments = UkfMoments(ens.mean[idx], ens.cov[idx])
        sig = sigma_points(augment(moments, config.imu_noise), config.tuning)
        pred, pts = time_update(sig, u, config.world, config.imu_noise, dT)
        return pred.mean.data, pred.cov, pts.data
    return work


def predict_step(ens: Ensemble, u: ImuSample, config: FilterConfig, dT: float | None = None,
                 mapper: _Mapper | None = None) -> Ensemble:
    """UKF time update for every particle; samples move to the predicted means."""
    own = mapper is None
    mapper = mapper or _Mapper(len(ens), 1)
    step = ens.step + 1
    try:
        mean, cov, pts = mapper(_predict_chunk(ens, u, config, dT), step)
    finally:
        if own:
            mapper.close()
    mean = NavState(mean)
    return Ensemble(mean=mean, cov=cov, samples=mean.copy(), weights=ens.weights.copy(), step=step,
                    prior=UkfMoments(mean, cov), points=NavState(pts))


def _prior_points(ens: Ensemble, config: FilterConfig) -> tuple[UkfMoments, NavState]:
    # no prediction since the last update (e.g. a frame at the very first sample):
    # the sigma points of the current moments stand in for the propagated ones
    prior = UkfMoments(ens.mean, ens.cov)
    sig = sigma_points(augment(prior, config.imu_noise), config.tuning)
    return prior, sig.points


def update_step(ens: Ensemble, frame: LandmarkFrame, config: FilterConfig,
                mapper: _Mapper | None = None) -> Ensemble:
    """Measurement update, proposal draw and importance weights for every particle."""
    if len(frame) == 0:
        raise PreconditionError("update_step needs a non-empty landmark frame")
    prior, points = (ens.prior, ens.points) if ens.points is not None else _prior_points(ens, config)
    z = frame.z
    C_f = config.landmark_noise.cov(z.shape[0])
    weights = config.tuning.weights()
    mode = config.proposal_mode
    step = ens.step

    def work(idx: Array):
        pred = UkfMoments(prior.mean[idx], prior.cov[idx])
        post, _, _ = measurement_update(pred, points[idx], weights, z, frame.f_w, C_f)
        center = post.mean if mode == STANDARD_UPF else pred.mean
        x = _sample_states(center, post.cov, config.seed, _PROPOSAL, step, idx, mode)
        log_lik = geo.gaussian_logpdf(z, landmark_h(x, frame.f_w), C_f)
        log_prior = geo.gaussian_logpdf(_deviation(x, pred.mean, mode), 0.0, pred.cov)
        log_prop = geo.gaussian_logpdf(_deviation(x, post.mean, mode), 0.0, post.cov)
        return post.mean.data, post.cov, x.data, log_lik, log_prior, log_prop

    own = mapper is None
    mapper = mapper or _Mapper(len(ens), 1)
    try:
        mean, cov, samples, log_lik, log_prior, log_prop = mapper(work, step)
    finally:
        if own:
            mapper.close()
    log_w = importance_log_weights(log_lik, log_prior, log_prop, config.epsilon)
    return Ensemble(mean=NavState(mean), cov=cov, samples=NavState(samples), weights=normalize_log_weights(log_w),
                    step=step)


def importance_log_weights(log_lik: Array, log_prior: Array, log_prop: Array, epsilon: float) -> Array:
    """``log(lik * prior / (prop + eps) + eps)`` evaluated without leaving the log domain."""
    log_eps = math.log(epsilon)
    return np.logaddexp(log_lik + log_prior - np.logaddexp(log_prop, log_eps), log_eps)


def normalize_log_weights(log_w: Array) -> Array:
    w = np.exp(log_w - np.max(log_w))
    return w / np.sum(w)


def effective_sample_size(weights: Array) -> float:
    return float(1.0 / np.sum(np.square(weights)))


def systematic_resample(weights: Array, rng: np.random.Generator) -> NDArray[np.intp]:
    """Indices drawn by low-variance resampling from one uniform offset."""
    m = weights.shape[0]
    positions = (np.arange(m) + rng.random()) / m
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, positions, side="right"), m - 1)


def resample_if_needed(ens: Ensemble, config: FilterConfig) -> tuple[Ensemble, bool, float]:
    ess = effective_sample_size(ens.weights)
    if ess >= config.m_thr:
        return ens, False, ess
    idx = systematic_resample(ens.weights, substream(config.seed, _RESAMPLE, ens.step, 0))
    m_p = len(ens)
    out = Ensemble(mean=ens.mean[idx].copy(), cov=ens.cov[idx].copy(), samples=ens.samples[idx].copy(),
                   weights=np.full(m_p, 1.0 / m_p), step=ens.step)
    return out, True, ess


def estimate(ens: Ensemble, t: float = 0.0, ess: float | None = None, resampled: bool = False) -> Estimate:
    """Weighted average of the particles.

    As a side effect each particle's UKF mean is reset to its sample, which seeds
    the next prediction.
    """
    q = geo.quat_weighted_mean(ens.samples.q, ens.weights)
    rest = ens.weights @ ens.samples.rest
    ens.mean = ens.samples.copy()
    ess = effective_sample_size(ens.weights) if ess is None else ess
    return Estimate(t, NavState(np.concatenate([q, rest])), ess, resampled)


def align_frames(times: Array, frames: Sequence[LandmarkFrame]) -> dict[int, LandmarkFrame]:
    """Map each landmark frame to the nearest IMU index (within half a sample period)."""
    times = np.asarray(times, dtype=float)
    out: dict[int, LandmarkFrame] = {}
    last_t = -np.inf
    for n, frame in enumerate(frames):
        if frame.t <= last_t:
            raise OrderingError(f"landmark frame {n} at t={frame.t} is not after t={last_t}")
        last_t = frame.t
        k = int(np.searchsorted(times, frame.t))
        cands = [j for j in (k - 1, k) if 0 <= j < len(times)]
        j = min(cands, key=lambda j: abs(times[j] - frame.t))
        spacing = np.diff(times[max(j - 1, 0):j + 2])
        half = 0.5 * (np.min(spacing) if spacing.size else np.inf)
        if abs(times[j] - frame.t) > half + 1e-12:
            raise DatasetError(f"landmark frame {n} at t={frame.t} does not align with any IMU sample")
        if j in out:
            raise DatasetError(f"landmark frames {n} and an earlier one both align with IMU sample {j}")
        if len(frame):
            out[j] = frame
    return out


def check_imu_times(times: Array) -> None:
    bad = np.nonzero(np.diff(times) <= 0.0)[0]
    if bad.size:
        k = int(bad[0]) + 1
        raise OrderingError(f"IMU sample {k} at t={times[k]} is not after t={times[k - 1]}")


def run(imu_stream, landmark_stream: Iterable[LandmarkFrame], config: FilterConfig,
        progress: Callable[[int, int], None] | None = None) -> list[Estimate]:
    """Filter a whole IMU stream, applying landmark updates where frames align.

    One estimate is produced per IMU sample. The first estimate is the
    (possibly updated) initial ensemble at the first IMU timestamp; estimate
    ``k`` results from propagating with IMU sample ``k - 1``.
    """
    times = np.asarray(imu_stream.t, dtype=float)
    check_imu_times(times)
    frames = align_frames(times, list(landmark_stream))
    mapper = _Mapper(config.m_p, worker_count(config))
    estimates: list[Estimate] = []
    try:
        ens = initialize(config)
        for k in range(len(times)):
            if k > 0:
                ens = predict_step(ens, imu_stream[k - 1], config, times[k] - times[k - 1], mapper)
            resampled, ess = False, None
            frame = frames.get(k)
            if frame is not None:
                ens = update_step(ens, frame, config, mapper)
                ens, resampled, ess = resample_if_needed(ens, config)
            try:
                estimates.append(estimate(ens, float(times[k]), ess, resampled))
            except QuaternionMeanAmbiguityError as exc:
                raise FilterStepError(k, None, exc) from exc
            if progress is not None:
                progress(k, len(times))
    finally:
        mapper.close()
    return estimates
