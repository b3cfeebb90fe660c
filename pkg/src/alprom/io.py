"""CSV and JSON writers. Files are written to a temporary name and renamed."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .driver import AlpTrajectory


@contextmanager
def atomic_open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return repr(float(v))


def trajectory_header(traj: AlpTrajectory) -> list[str]:
    cols = ["step", "time", "n_negative"]
    cols += [f"lambda_{m + 1}" for m in range(traj.eigenvalues.shape[1])]
    cols += ["frobenius", "gram_deviation"]
    if traj.l2_error is not None:
        cols.append("l2_error")
    if traj.peak_error is not None:
        cols.append("peak_error")
    return cols


def write_trajectory_csv(path, traj: AlpTrajectory) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(traj))
        for n in range(traj.n_rows):
            row = [str(n), _fmt(traj.times[n]), str(int(traj.n_negative[n]))]
            row += [_fmt(v) for v in traj.eigenvalues[n]]
            row += [_fmt(traj.frobenius[n]), _fmt(traj.gram_deviation[n])]
            if traj.l2_error is not None:
                row.append(_fmt(traj.l2_error[n]))
            if traj.peak_error is not None:
                row.append(_fmt(traj.peak_error[n]))
            w.writerow(row)


def write_field_csv(path, nodes, values) -> None:
    """Nodal snapshot: ``node_index, x, [y], value``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_index", "x"] + (["y"] if nodes.shape[1] == 2 else []) + ["value"])
        for i, (p, v) in enumerate(zip(nodes, values)):
            w.writerow([str(i)] + [_fmt(c) for c in p] + [_fmt(v)])


def write_rows_csv(path, header, rows) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(path, data) -> None:
    with atomic_open(path) as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
