"""Command-line entry point.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import AlpConfig, bundled_config_path, echo, load_config
from .driver import AlpTrajectory, run_alp, spectrum_summary
from .errors import ConfigError, NumericalError
from .io import write_field_csv, write_json, write_rows_csv, write_trajectory_csv

log = logging.getLogger("alprom")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _resolve_config(arg: str) -> AlpConfig:
    path = Path(arg)
    if not path.exists() and not path.suffix:
        path = bundled_config_path(arg)
    return load_config(path)


def summarize(config: AlpConfig, traj: AlpTrajectory) -> dict:
    out = {
        "config": echo(config),
        "chi": traj.chi,
        "n_steps": traj.n_rows - 1,
        "final_time": float(traj.times[-1]),
        "initial_n_negative": int(traj.n_negative[0]),
        "final_n_negative": int(traj.n_negative[-1]),
        "initial_reconstruction_error": {"relative": traj.initial_error, "absolute": traj.initial_error_abs},
        "final_eigenvalues": traj.eigenvalues[-1],
        "max_gram_deviation": float(traj.gram_deviation.max()),
        "final_frobenius": float(traj.frobenius[-1]),
        "promotion_events": [e.as_dict() for e in traj.promotions],
        "wall_clock_seconds": traj.wall_time,
    }
    errors = {}
    if traj.l2_error is not None:
        errors["l2_relative_final"] = float(traj.l2_error[-1])
        errors["l2_relative_max"] = float(traj.l2_error.max())
    if traj.peak_error is not None:
        errors["peak_position_final"] = float(traj.peak_error[-1])
    if traj.frobenius_gap is not None:
        errors["frobenius_gap_max"] = float(np.nanmax(traj.frobenius_gap))
    out["final_errors"] = errors
    return out


def _write_snapshots(outdir: Path, traj: AlpTrajectory):
    snapdir = outdir / "snapshots"
    for n, u in sorted(traj.snapshots.items()):
        write_field_csv(snapdir / f"step_{n:06d}.csv", traj.fem.mesh.nodes, u)


def cmd_run(args) -> int:
    config = _resolve_config(args.config)
    traj = run_alp(config)
    outdir = Path(args.output_dir)
    write_trajectory_csv(outdir / config.trajectory_file, traj)
    if config.write_snapshots:
        _write_snapshots(outdir, traj)
    summary = summarize(config, traj)
    write_json(outdir / config.summary_file, summary)
    print(json.dumps({k: summary[k] for k in ("chi", "final_n_negative", "final_errors")}, default=float))
    return 0


def cmd_compare(args) -> int:
    config = _resolve_config(args.config)
    if not config.track_errors:
        config = config.with_override("diagnostics.track_errors", "true")
    traj = run_alp(config)
    if traj.l2_error is None:
        raise ConfigError("no exact or reference solution is available for this problem")
    outdir = Path(args.output_dir)
    header = ["step", "time", "l2_error"] + (["peak_error"] if traj.peak_error is not None else [])
    rows = []
    for n in range(traj.n_rows):
        row = [n, float(traj.times[n]), float(traj.l2_error[n])]
        if traj.peak_error is not None:
            row.append(float(traj.peak_error[n]))
        rows.append(row)
    write_rows_csv(outdir / "compare.csv", header, rows)
    summary = summarize(config, traj)
    write_json(outdir / config.summary_file, summary)
    print(json.dumps(summary["final_errors"]))
    return 0


def _sweep_one(config: AlpConfig, param: str, value: str):
    cfg = config.with_override(param, value)
    traj = run_alp(cfg)
    s = summarize(cfg, traj)
    e = s["final_errors"]
    return [value, s["final_n_negative"], e.get("l2_relative_final", float("nan")),
            e.get("l2_relative_max", float("nan")), e.get("peak_position_final", float("nan")),
            float(traj.eigenvalues[-1, 0]), s["final_frobenius"], s["max_gram_deviation"],
            len(s["promotion_events"]), s["wall_clock_seconds"]]


SWEEP_HEADER = ["value", "final_n_negative", "l2_error_final", "l2_error_max", "peak_error_final",
                "lambda_1_final", "frobenius_final", "max_gram_deviation", "promotions", "wall_clock_seconds"]


def cmd_sweep(args) -> int:
    config = _resolve_config(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    for v in values:
        config.with_override(args.param, v)  # validate every value before running anything
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, [config] * len(values), [args.param] * len(values), values))
    else:
        rows = [_sweep_one(config, args.param, v) for v in values]
    outdir = Path(args.output_dir)
    write_rows_csv(outdir / "sweep.csv", SWEEP_HEADER, rows)
    for r in rows:
        print(f"{args.param}={r[0]}: l2_final={r[2]:.4g} peak_final={r[4]:.4g}")
    return 0


def cmd_spectrum(args) -> int:
    config = _resolve_config(args.config)
    summary = spectrum_summary(config)
    summary["config"] = echo(config)
    if args.output_dir:
        write_json(Path(args.output_dir) / "spectrum.json", summary)
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="alprom", description="Reduced-order PDE evolution on Schrodinger eigenmodes.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, output_required=True):
        sp.add_argument("--config", required=True, help="config file, or the name of a bundled config")
        sp.add_argument("--output-dir", required=output_required, default=None)

    common(sub.add_parser("run", help="run the reduced model, write trajectory CSV and summary JSON"))
    common(sub.add_parser("compare", help="run and write error-versus-time against the reference"))
    sw = sub.add_parser("sweep", help="one run per value of a parameter")
    common(sw)
    sw.add_argument("--param", required=True, help="n_modes_M, dt, chi, t_final, epsilon0 or section.key")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1)
    common(sub.add_parser("spectrum", help="decompose the initial datum only"), output_required=False)
    return p


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
