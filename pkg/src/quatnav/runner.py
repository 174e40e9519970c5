"""Glue between datasets, configs, filters and result files (used by the CLI and the benchmark tests)."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ekf_baseline, qupf
from .config import RunConfig, SimSpec
from .errors import ConfigError
from .kinematics import NavState
from .qupf import Estimate
from .simkit import dataset as ds
from .simkit.metrics import ErrorSummary, ErrorTable, compute_errors, summarize
from .simkit.sensors import synthesize_sensors
from .simkit.trajectory import generate_trajectory


@dataclass
class RunResult:
    filter: str
    estimates: list[Estimate]
    t: np.ndarray
    states: NavState
    errors: ErrorTable | None
    summary: ErrorSummary | None
    wall_time: float

    @property
    def resample_count(self) -> int:
        return sum(e.resampled for e in self.estimates)


def simulate(spec: SimSpec, seed: int | None = None) -> ds.Dataset:
    """Synthesize a full dataset (IMU, landmark frames, truth) from a simulation spec."""
    seed = spec.seed if seed is None else seed
    tspec = spec.trajectory_spec()
    t, truth, rates = generate_trajectory(tspec)
    imu, frames, biases = synthesize_sensors(
        t, truth, rates, spec.imu_noise.build(), spec.landmark_noise_model(), tspec, seed,
        initial_bias=(spec.imu_bias.b_omega, spec.imu_bias.b_acc))
    truth = NavState(np.concatenate([truth.data[:, :10], biases], axis=1))
    return ds.Dataset(imu, frames, ds.Trajectory(t, truth))


def truth_errors(truth: ds.Trajectory | None, t: np.ndarray, states: NavState) -> ErrorTable | None:
    """Errors of the estimates inside the truth span (truth interpolated when timestamps differ)."""
    if truth is None or len(truth) == 0:
        return None
    if truth.t.shape == t.shape and np.array_equal(truth.t, t):
        return compute_errors(t, truth.states, t, states)
    inside = (t >= truth.t[0]) & (t <= truth.t[-1])
    if not np.any(inside):
        return None
    ref = ds.interpolate_trajectory(truth, t[inside])
    return compute_errors(ref.t, ref.states, t[inside], states[inside])


def run_filter(data: ds.Dataset, cfg: RunConfig, filter_name: str | None = None, progress=None) -> RunResult:
    name = filter_name or cfg.filter
    if len(data.imu) == 0:
        raise ConfigError("dataset has no IMU samples")
    fcfg = cfg.filter_config(data.truth, float(data.imu.t[0]))
    start = time.perf_counter()
    if name == "qupf":
        est = qupf.run(data.imu, data.frames, fcfg, progress=progress)
    elif name == "ekf":
        est = ekf_baseline.run_ekf(data.imu, data.frames, fcfg)
    elif name == "deadreckon":
        est = ekf_baseline.run_deadreckon(data.imu, fcfg)
    else:
        raise ConfigError(f"unknown filter {name!r}; choose qupf, ekf or deadreckon")
    wall = time.perf_counter() - start
    t = np.array([e.t for e in est])
    states = NavState(np.stack([e.state.data for e in est]))
    errors = truth_errors(data.truth, t, states)
    summary = None
    if errors is not None and len(errors):
        r = cfg.report
        summary = summarize(errors, r.transient, r.threshold_p, r.threshold_r)
    return RunResult(name, est, t, states, errors, summary, wall)


def report_dict(result: RunResult, cfg: RunConfig, outputs: dict[str, str]) -> dict:
    return {
        "filter": result.filter,
        "config": cfg.model_dump(mode="json", by_alias=True),
        "summary": None if result.summary is None else result.summary.to_dict(),
        "estimate_count": len(result.estimates),
        "resample_count": result.resample_count,
        "wall_time_s": result.wall_time,
        "outputs": outputs,
    }


def write_run(out: Path, result: RunResult, cfg: RunConfig) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"estimates": str(out / "estimates.csv")}
    ds.write_trajectory(out / "estimates.csv", result.t, result.states)
    if result.errors is not None:
        ds.write_errors(out / "errors.csv", result.errors)
        outputs["errors"] = str(out / "errors.csv")
    outputs["report"] = str(out / "report.json")
    report = report_dict(result, cfg, outputs)
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def format_report(report: dict) -> str:
    lines = [f"filter: {report['filter']}",
             f"estimates: {report['estimate_count']}  resamples: {report['resample_count']}  "
             f"wall time: {report['wall_time_s']:.2f} s"]
    s = report["summary"]
    if s is None:
        lines.append("no ground truth: errors not computed")
    else:
        lines.append(f"RMSE from t={s['window_start']:.3f} s: attitude {s['rmse_r']:.6g} rad, "
                     f"position {s['rmse_p']:.6g} m, velocity {s['rmse_v']:.6g} m/s")
        lines.append(f"final: attitude {s['final_r']:.6g} rad, position {s['final_p']:.6g} m, "
                     f"velocity {s['final_v']:.6g} m/s")
        conv = ", ".join(f"{k} {'never' if s[f'convergence_time_{k}'] is None else format(s[f'convergence_time_{k}'], '.3f') + ' s'}"
                         for k in ("p", "r"))
        lines.append(f"convergence: {conv}")
    for k, v in report["outputs"].items():
        lines.append(f"{k}: {v}")
    return "\n".join(lines)
