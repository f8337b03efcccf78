"""Trace CSV and run summary files.

Columns: ``t``, then one block per robot ``i``

    x1_i, x2_i, E_i, u1_i, u2_i, uhat1_i, uhat2_i, delta_i, h1_i, h2_i, qp_status_i

then the task metric (``ergodic_eps`` or ``loc_cost``) and ``C``.  Floats are
written with ``repr`` so a read-back is bit exact.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import SimTrace

ROBOT_FIELDS = ("x1", "x2", "E", "u1", "u2", "uhat1", "uhat2", "delta", "h1", "h2", "qp_status")
METRIC_NAMES = ("ergodic_eps", "loc_cost")


class TraceFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def header(n_robots: int, metric_name: str) -> list[str]:
    cols = ["t"]
    for i in range(n_robots):
        cols += [f"{name}_{i}" for name in ROBOT_FIELDS]
    return cols + [metric_name, "C"]


def _fmt(v) -> str:
    return repr(float(v))


def write_trace(tr: SimTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = tr.n_robots
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header(n, tr.metric_name))
        for k in range(tr.t.size):
            row = [_fmt(tr.t[k])]
            for i in range(n):
                row += [_fmt(tr.x[k, i, 0]), _fmt(tr.x[k, i, 1]), _fmt(tr.E[k, i]),
                        _fmt(tr.u[k, i, 0]), _fmt(tr.u[k, i, 1]),
                        _fmt(tr.u_hat[k, i, 0]), _fmt(tr.u_hat[k, i, 1]),
                        _fmt(tr.delta[k, i]), _fmt(tr.h1[k, i]), _fmt(tr.h2[k, i]),
                        str(int(tr.status[k, i]))]
            row += [_fmt(tr.metric[k]), _fmt(tr.C[k])]
            w.writerow(row)
    return path


@dataclass
class TraceTable:
    """Trace read back from CSV: ``t`` (R,), per-robot arrays (R, N)."""

    t: np.ndarray
    columns: dict
    n_robots: int
    metric_name: str

    def robot(self, name: str) -> np.ndarray:
        return np.column_stack([self.columns[f"{name}_{i}"] for i in range(self.n_robots)]) \
            if self.n_robots else np.zeros((self.t.size, 0))

    @property
    def metric(self) -> np.ndarray:
        return self.columns[self.metric_name]

    @property
    def C(self) -> np.ndarray:
        return self.columns["C"]


def _check_header(cols: list[str]) -> tuple[int, str]:
    if len(cols) < 3 or cols[0] != "t" or cols[-1] != "C":
        raise TraceFormatError("header must start with 't' and end with 'C'", 1)
    metric = cols[-2]
    if metric not in METRIC_NAMES:
        raise TraceFormatError(f"unknown metric column {metric!r}", 1)
    body = len(cols) - 3
    if body % len(ROBOT_FIELDS):
        raise TraceFormatError(f"{body} robot columns is not a multiple of {len(ROBOT_FIELDS)}", 1)
    n = body // len(ROBOT_FIELDS)
    if cols != header(n, metric):
        raise TraceFormatError("unexpected column names", 1)
    return n, metric


def read_trace(path) -> TraceTable:
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise TraceFormatError(f"cannot read trace {str(path)!r}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            cols = next(reader)
        except StopIteration:
            raise TraceFormatError("empty file", 1) from None
        n, metric = _check_header(cols)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(cols):
                raise TraceFormatError(f"expected {len(cols)} fields, got {len(row)}", lineno)
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise TraceFormatError(str(exc), lineno) from None
            if rows and vals[0] < rows[-1][0]:
                raise TraceFormatError("time is not monotone", lineno)
            rows.append(vals)
    if not rows:
        raise TraceFormatError("no data rows", 2)
    data = np.array(rows, dtype=float)
    columns = {name: data[:, j] for j, name in enumerate(cols)}
    return TraceTable(t=data[:, 0], columns=columns, n_robots=n, metric_name=metric)


def write_summary(summary: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
