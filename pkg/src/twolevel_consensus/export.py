"""Trajectory CSV and metrics JSON files, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .simulator import RunMetrics, Trajectory

SERIES = ("y", "z", "e", "u", "v")


def atomic_write_text(path, text: str) -> Path:
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


def _fmt(x: float) -> str:
    # 17 significant digits round-trip every double exactly
    return format(float(x), ".17g")


def trajectory_csv(traj: Trajectory) -> str:
    n = traj.n_agents
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"{name}_{i + 1}" for name in SERIES for i in range(n)])
    cols = np.hstack([traj.times[:, None]] + [getattr(traj, name) for name in SERIES])
    for row in cols:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    return atomic_write_text(path, trajectory_csv(traj))


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV: ``t`` plus ``(T, N)`` arrays for y, z, e, u, v."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]])
    out = {"t": body[:, 0]}
    for name in SERIES:
        idx = [k for k, h in enumerate(header) if h.startswith(f"{name}_")]
        out[name] = body[:, idx]
    return out


def metrics_json(metrics: RunMetrics, **extra) -> str:
    return json.dumps({**metrics.to_dict(), **extra}, indent=2, sort_keys=True) + "\n"


def write_metrics_json(metrics: RunMetrics, path, **extra) -> Path:
    return atomic_write_text(path, metrics_json(metrics, **extra))
