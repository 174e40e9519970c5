"""Command-line interface: ``quatnav simulate | run | compare``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import QuatNavError
from .runner import format_report, run_filter, simulate, write_run
from .simkit import dataset as ds

def _resolve(arg: str) -> Path:
    return cfgmod.resolve_path(arg)


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = cfgmod.load_sim_spec(_resolve(args.spec))
    data = simulate(spec, args.seed)
    out = ds.write_dataset(args.out, data.imu, data.frames, data.truth)
    n_lm = sum(len(f) for f in data.frames)
    print(f"wrote {out}: {len(data.imu)} IMU samples, {len(data.frames)} landmark frames "
          f"({n_lm} landmarks), {len(data.truth)} ground-truth states, "
          f"{data.imu.t[-1] - data.imu.t[0]:.3f} s span, seed {spec.seed if args.seed is None else args.seed}")
    return 0


def _load_data(args: argparse.Namespace) -> ds.Dataset:
    return ds.load_dataset(args.data, args.format)


def _check_dataset_ref(cfg: cfgmod.RunConfig, data_dir: str, source: str) -> None:
    if cfg.dataset is not None and Path(cfg.dataset).resolve() != Path(data_dir).resolve():
        raise cfgmod.ConfigError(f"{source} refers to dataset {cfg.dataset!r} but --data is {data_dir!r}")


def cmd_run(args: argparse.Namespace) -> int:
    path = _resolve(args.config) if args.config else None
    cfg = cfgmod.load_run_config(path) if path else cfgmod.RunConfig()
    if path:
        _check_dataset_ref(cfg, args.data, str(path))
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    data = _load_data(args)
    result = run_filter(data, cfg, args.filter)
    report = write_run(Path(args.out), result, cfg)
    print(format_report(report))
    return 0


def _labels(paths: list[str]) -> list[str]:
    stems = [Path(p).stem if not p.startswith(cfgmod.BUILTIN) else p[len(cfgmod.BUILTIN):] for p in paths]
    return [s if stems.count(s) == 1 else f"{s}_{i + 1}" for i, s in enumerate(stems)]


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.configs) < 2:
        raise cfgmod.ConfigError("compare needs at least two configs")
    configs = []
    for arg in args.configs:
        path = _resolve(arg)
        cfg = cfgmod.load_run_config(path)
        _check_dataset_ref(cfg, args.data, str(path))
        configs.append(cfg)
    seeds = {c.seed for c in configs}
    if args.seed is not None:
        configs = [c.model_copy(update={"seed": args.seed}) for c in configs]
    elif len(seeds) > 1:
        logging.getLogger(__name__).warning("configs use different seeds %s; pass --seed to align them", sorted(seeds))
    data = _load_data(args)
    labels = _labels(args.configs)
    results = [run_filter(data, c) for c in configs]
    if any(r.errors is None for r in results):
        raise cfgmod.ConfigError("compare needs a dataset with ground truth")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = results[0].errors.t
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{lab}_{col}" for lab in labels for col in ("re_norm", "pe_norm", "ve_norm")])
        cols = [t] + [c for r in results for c in (r.errors.r_norm, r.errors.p_norm, r.errors.v_norm)]
        for row in np.column_stack(cols):
            w.writerow([ds.fmt(x) for x in row])
    order = sorted(range(len(results)), key=lambda i: (results[i].summary.rmse_p, results[i].summary.rmse_r, i))
    with open(out / "ranking.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "label", "filter", "rmse_r", "rmse_p", "rmse_v", "final_r", "final_p", "final_v"])
        for rank, i in enumerate(order, start=1):
            s = results[i].summary
            w.writerow([rank, labels[i], results[i].filter] +
                       [ds.fmt(x) for x in (s.rmse_r, s.rmse_p, s.rmse_v, s.final_r, s.final_p, s.final_v)])
    width = max(len(lab) for lab in labels)
    print(f"{'rank':>4}  {'label':<{width}}  {'filter':<10} {'rmse_r':>12} {'rmse_p':>12} {'rmse_v':>12}")
    for rank, i in enumerate(order, start=1):
        s = results[i].summary
        print(f"{rank:>4}  {labels[i]:<{width}}  {results[i].filter:<10} {s.rmse_r:12.6g} {s.rmse_p:12.6g} {s.rmse_v:12.6g}")
    print(f"comparison: {out / 'comparison.csv'}\nranking: {out / 'ranking.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quatnav", description="Quaternion unscented particle filter for "
                                     "visual-inertial navigation: simulate data, run filters, compare them.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="synthesize a dataset", description="Write imu.csv, landmarks.csv and "
                       "groundtruth.csv for a synthetic trajectory.")
    p.add_argument("--spec", required=True, help="simulation spec TOML file, or builtin:benchmark")
    p.add_argument("--out", required=True, help="output dataset directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the seed in the simulation spec)")
    p.set_defaults(func=cmd_simulate)

    fmt_help = f"dataset layout: {ds.NATIVE} (default) or {ds.ASL}"
    p = sub.add_parser("run", help="run one filter on a dataset", description="Run a filter and write "
                       "estimates.csv, errors.csv (when ground truth exists) and report.json.")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--filter", choices=cfgmod.FILTERS, default=None,
                   help="filter to run (default: the config's 'filter' entry)")
    p.add_argument("--config", default=None, help="run config TOML file or builtin:<name> (default: built-in defaults)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--format", choices=ds.FORMATS, default=ds.NATIVE, help=fmt_help)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several configs on one dataset", description="Run each config on the "
                       "same streams and write comparison.csv (per-step error norms) and ranking.csv (by RMSE).")
    p.add_argument("--data", required=True, help="dataset directory with ground truth")
    p.add_argument("--configs", required=True, nargs="+", help="two or more run config files (or builtin:<name>)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="seed applied to every config")
    p.add_argument("--format", choices=ds.FORMATS, default=ds.NATIVE, help=fmt_help)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except QuatNavError as exc:
        print(f"quatnav {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"quatnav {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
