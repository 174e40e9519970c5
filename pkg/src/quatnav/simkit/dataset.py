"""Dataset files: native CSV read/write, ASL (EuRoC-style) ingestion, result writers.

Native layout (one directory)::

    imu.csv          t,wx,wy,wz,ax,ay,az
    landmarks.csv    t,id,fwx,fwy,fwz,fbx,fby,fbz   (consecutive rows sharing t form a frame)
    groundtruth.csv  t,qw,qx,qy,qz,px,py,pz,vx,vy,vz  (optional)

Quaternions are ``[w, x, y, z]`` everywhere. Floats are written with 17
significant digits so a write/read cycle is exact.

ASL layout: ``mav0/imu0/data.csv`` and optionally
``mav0/state_groundtruth_estimate0/data.csv`` with integer nanosecond
timestamps; ``#`` lines are comments. Landmarks are not part of ASL and must be
supplied as a native ``landmarks.csv`` next to ``mav0``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

from .. import geometry as geo
from ..errors import DatasetError, OrderingError, PreconditionError
from ..kinematics import ImuStream, NavState
from ..sensing import LandmarkFrame

Array = NDArray[np.float64]

log = logging.getLogger(__name__)

NATIVE = "native-csv"
ASL = "asl-csv"
FORMATS = (NATIVE, ASL)

IMU_HEADER = ("t", "wx", "wy", "wz", "ax", "ay", "az")
LANDMARK_HEADER = ("t", "id", "fwx", "fwy", "fwz", "fbx", "fby", "fbz")
TRUTH_HEADER = ("t", "qw", "qx", "qy", "qz", "px", "py", "pz", "vx", "vy", "vz")
ERROR_HEADER = ("t", "re1", "re2", "re3", "pe1", "pe2", "pe3", "ve1", "ve2", "ve3", "re_norm", "pe_norm", "ve_norm")

ASL_IMU = Path("mav0", "imu0", "data.csv")
ASL_TRUTH = Path("mav0", "state_groundtruth_estimate0", "data.csv")
_ASL_IMU_COLS = ("timestamp", "w_x", "w_y", "w_z", "a_x", "a_y", "a_z")
_ASL_TRUTH_COLS = ("timestamp", "p_x", "p_y", "p_z", "q_w", "q_x", "q_y", "q_z", "v_x", "v_y", "v_z")


@dataclass
class Trajectory:
    """Timestamped states (ground truth or estimates)."""

    t: Array
    states: NavState

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class Dataset:
    imu: ImuStream
    frames: list[LandmarkFrame]
    truth: Trajectory | None


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def ns_to_seconds(ns: int) -> float:
    """Nanoseconds to seconds, correctly rounded (integer true division is exact before rounding)."""
    return int(ns) / 10**9


def ns_to_decimal(ns: int) -> Decimal:
    """Exact decimal seconds for an integer nanosecond timestamp."""
    return Decimal(int(ns)).scaleb(-9)


# ---------------------------------------------------------------- reading


def _rows(path: Path, header: Sequence[str] | None, comments: bool = False) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, cells)``; checks the header line when one is required."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open: {exc.strerror}", str(path)) from exc
    with fh:
        seen_header = header is None
        for line_no, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if comments and cells[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in cells]
            if not seen_header:
                if tuple(cells) != tuple(header):
                    raise DatasetError(f"expected header {','.join(header)}, got {','.join(cells)}", str(path), line_no)
                seen_header = True
                continue
            yield line_no, cells


def _parse_row(path: Path, line_no: int, cells: list[str], names: Sequence[str], int_cols=(),
               min_cols: int | None = None) -> list:
    need = len(names) if min_cols is None else min_cols
    if len(cells) < need or (min_cols is None and len(cells) != len(names)):
        raise DatasetError(f"expected {len(names)} columns, got {len(cells)}", str(path), line_no)
    out = []
    for j, name in enumerate(names):
        cell = cells[j]
        try:
            out.append(int(cell) if j in int_cols else float(cell))
        except ValueError:
            kind = "integer" if j in int_cols else "number"
            raise DatasetError(f"cannot parse {cell!r} as a {kind}", str(path), line_no, name) from None
        if j not in int_cols and not np.isfinite(out[-1]):
            raise DatasetError(f"non-finite value {cell!r}", str(path), line_no, name)
    return out


def _check_increasing(path: Path, t: float, prev: float, line_no: int, strict: bool = True) -> None:
    if t < prev or (strict and t == prev):
        raise OrderingError(f"timestamp {t!r} is not after the previous {prev!r}", str(path), line_no, "t")


def read_imu(path: Path) -> ImuStream:
    path = Path(path)
    rows, prev = [], -np.inf
    for line_no, cells in _rows(path, IMU_HEADER):
        vals = _parse_row(path, line_no, cells, IMU_HEADER)
        _check_increasing(path, vals[0], prev, line_no)
        prev = vals[0]
        rows.append(vals)
    arr = np.array(rows, dtype=float).reshape(-1, 7)
    return ImuStream(arr[:, 0], arr[:, 1:4], arr[:, 4:7])


def read_landmarks(path: Path) -> list[LandmarkFrame]:
    path = Path(path)
    frames: list[LandmarkFrame] = []
    cur_t, cur_rows, cur_line, prev = None, [], 0, -np.inf

    def flush() -> None:
        if cur_t is None:
            return
        ids = [r[1] for r in cur_rows]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise DatasetError(f"duplicate landmark id {min(dup)} in frame at t={cur_t!r}", str(path), cur_line, "id")
        arr = np.array([r[2:] for r in cur_rows], dtype=float).reshape(-1, 6)
        frames.append(LandmarkFrame(cur_t, np.array(ids, dtype=np.int64), arr[:, :3], arr[:, 3:]))

    for line_no, cells in _rows(path, LANDMARK_HEADER):
        vals = _parse_row(path, line_no, cells, LANDMARK_HEADER, int_cols=(1,))
        t = vals[0]
        _check_increasing(path, t, prev, line_no, strict=False)
        prev = t
        if t != cur_t:
            flush()
            cur_t, cur_rows, cur_line = t, [], line_no
        cur_rows.append(vals)
    flush()
    return frames


def read_trajectory(path: Path) -> Trajectory:
    path = Path(path)
    rows, prev = [], -np.inf
    for line_no, cells in _rows(path, TRUTH_HEADER):
        vals = _parse_row(path, line_no, cells, TRUTH_HEADER)
        _check_increasing(path, vals[0], prev, line_no)
        prev = vals[0]
        rows.append(vals)
    arr = np.array(rows, dtype=float).reshape(-1, 11)
    return Trajectory(arr[:, 0], _states(arr[:, 1:5], arr[:, 5:8], arr[:, 8:11]))


def _states(q: Array, p: Array, v: Array) -> NavState:
    # keep stored unit quaternions bit for bit; normalize anything else
    fix = (np.abs(np.linalg.norm(q, axis=-1) - 1.0) > 1e-12) | (q[:, 0] < 0.0)
    q = q.copy()
    if np.any(fix):
        q[fix] = geo.canonicalize(q[fix])
    return NavState(np.concatenate([q, p, v, np.zeros((len(q), 6))], axis=-1))


def _read_asl(path: Path, names: Sequence[str], min_cols: int) -> tuple[Array, Array]:
    ts, rows, prev_ns = [], [], None
    for line_no, cells in _rows(path, None, comments=True):
        vals = _parse_row(path, line_no, cells, names, int_cols=(0,), min_cols=min_cols)
        ns = vals[0]
        if prev_ns is not None and ns <= prev_ns:
            raise OrderingError(f"timestamp {ns} ns is not after the previous {prev_ns} ns", str(path), line_no,
                                names[0])
        prev_ns = ns
        ts.append(ns_to_seconds(ns))
        rows.append(vals[1:])
    return np.array(ts, dtype=float), np.array(rows, dtype=float).reshape(-1, len(names) - 1)


def _asl_root(path: Path) -> Path:
    if (path / ASL_IMU).is_file():
        return path
    if path.name == "mav0" and (path.parent / ASL_IMU).is_file():
        return path.parent
    raise DatasetError(f"no {ASL_IMU.as_posix()} under this directory", str(path))


def load_dataset(path, format: str = NATIVE) -> Dataset:
    """Load IMU, landmark frames and (when present) ground truth from a directory."""
    path = Path(path)
    if format not in FORMATS:
        raise PreconditionError(f"format must be one of {FORMATS}, got {format!r}")
    if not path.is_dir():
        raise DatasetError("dataset directory does not exist", str(path))
    if format == NATIVE:
        imu = read_imu(path / "imu.csv")
        lm = path / "landmarks.csv"
        frames = read_landmarks(lm) if lm.is_file() else []
        gt = path / "groundtruth.csv"
        truth = read_trajectory(gt) if gt.is_file() else None
        return Dataset(imu, frames, truth)
    root = _asl_root(path)
    t, vals = _read_asl(root / ASL_IMU, _ASL_IMU_COLS, len(_ASL_IMU_COLS))
    imu = ImuStream(t, vals[:, 0:3], vals[:, 3:6])
    lm = root / "landmarks.csv"
    if lm.is_file():
        frames = read_landmarks(lm)
    else:
        log.warning("%s has no landmarks.csv; running without landmark updates", root)
        frames = []
    truth = None
    if (root / ASL_TRUTH).is_file():
        tt, g = _read_asl(root / ASL_TRUTH, _ASL_TRUTH_COLS, len(_ASL_TRUTH_COLS))
        truth = Trajectory(tt, _states(g[:, 3:7], g[:, 0:3], g[:, 7:10]))
    return Dataset(imu, frames, truth)


def interpolate_trajectory(traj: Trajectory, times: Array) -> Trajectory:
    """Truth at arbitrary times inside its span: geodesic attitude, linear position and velocity."""
    times = np.asarray(times, dtype=float)
    if len(traj) == 0 or times.min() < traj.t[0] or times.max() > traj.t[-1]:
        raise DatasetError("requested times fall outside the ground-truth span")
    j = np.clip(np.searchsorted(traj.t, times, side="right") - 1, 0, max(len(traj) - 2, 0))
    if len(traj) == 1:
        return Trajectory(times, NavState(np.broadcast_to(traj.states.data[0], (len(times), 16)).copy()))
    t0, t1 = traj.t[j], traj.t[j + 1]
    frac = ((times - t0) / (t1 - t0))[:, None]
    s0, s1 = traj.states[j], traj.states[j + 1]
    q = geo.boxplus(s0.q, frac * geo.boxminus_qq(s1.q, s0.q))
    rest = s0.rest + frac * (s1.rest - s0.rest)
    return Trajectory(times, NavState(np.concatenate([q, rest], axis=-1)))


# ---------------------------------------------------------------- writing


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_imu(path: Path, imu: ImuStream) -> None:
    _write(path, IMU_HEADER, ([fmt(t), *map(fmt, w), *map(fmt, a)] for t, w, a in zip(imu.t, imu.omega_m, imu.acc_m)))


def write_landmarks(path: Path, frames: Sequence[LandmarkFrame]) -> None:
    def rows():
        for fr in frames:
            for i, fw, fb in zip(fr.ids, fr.f_w, fr.f_b):
                yield [fmt(fr.t), str(int(i)), *map(fmt, fw), *map(fmt, fb)]
    _write(path, LANDMARK_HEADER, rows())


def write_trajectory(path: Path, t: Array, states: NavState) -> None:
    data = np.concatenate([np.asarray(t, dtype=float)[:, None], states.data[:, :10]], axis=1)
    _write(path, TRUTH_HEADER, ([fmt(x) for x in row] for row in data))


def write_dataset(path, imu: ImuStream, frames: Sequence[LandmarkFrame], truth: Trajectory | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_imu(path / "imu.csv", imu)
    write_landmarks(path / "landmarks.csv", frames)
    if truth is not None:
        write_trajectory(path / "groundtruth.csv", truth.t, truth.states)
    return path


def write_errors(path: Path, table) -> None:
    data = np.column_stack([table.t, table.r_e, table.p_e, table.v_e, table.r_norm, table.p_norm, table.v_norm])
    _write(path, ERROR_HEADER, ([fmt(x) for x in row] for row in data))
