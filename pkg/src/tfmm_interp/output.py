"""Deterministic CSV/JSON writers. Files are written to a temp name and renamed into place."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .backtest import BacktestReport
from .core import Trajectory


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


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


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def weight_header(n: int) -> list[str]:
    return [f"w_{i + 1}" for i in range(n)]


def write_trajectory(path, traj: Trajectory) -> Path:
    return write_csv(path, ["k", *weight_header(traj.n)], ([k, *row] for k, row in enumerate(traj.steps)))


def write_deltas(path, traj: Trajectory) -> Path:
    """Rows k = 0..f-1 hold w(t_{k+1}) - w(t_k)."""
    header = ["k", *(f"dw_{i + 1}" for i in range(traj.n))]
    return write_csv(path, header, ([k, *row] for k, row in enumerate(traj.deltas())))


def write_difference(path, a: np.ndarray, b: np.ndarray) -> Path:
    d = np.asarray(a) - np.asarray(b)
    header = ["k", *(f"d_{i + 1}" for i in range(d.shape[1]))]
    return write_csv(path, header, ([k, *row] for k, row in enumerate(d)))


def write_report(path, report: BacktestReport) -> Path:
    rows = zip(report.timestamps, report.per_block_value, report.fees_cum, report.arb_cost_cum)
    return write_csv(path, ["timestamp", "value", "fees_cum", "arb_cost_cum"], rows)
