"""CSV/JSON writers.  Floats use 17 significant digits; files are written
to a temporary sibling and renamed into place."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x):
    x = float(x)
    if np.isnan(x):
        return ""
    return format(x, ".17g")


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Inverse of :func:`write_csv`: (header, float array).  Blank cells read as NaN."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(c) if c else np.nan for c in line.strip().split(",")]
                for line in fh if line.strip()]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    return _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def trajectory_header(dim):
    return ["t"] + [f"x_{i + 1}" for i in range(dim)] + [f"v_{i + 1}" for i in range(dim)]


def trajectory_rows(traj):
    return np.column_stack([traj.times, traj.positions, traj.velocities])


def write_trajectory(path, traj):
    return write_csv(path, trajectory_header(traj.dim), trajectory_rows(traj))


def sweep_header(n):
    return ([f"K_{i + 1}" for i in range(n)] + ["objective"]
            + [f"residual_{i + 1}" for i in range(n)])


def write_sweep(path, records):
    n = records[0].K.size
    rows = [np.concatenate([r.K, [r.objective], r.residual]) for r in records]
    return write_csv(path, sweep_header(n), rows)


def write_profile(path, profile):
    return write_csv(path, profile.header(), profile.rows())
