"""Read-only access to simulation trajectory logs.

These scripts never recompute control quantities; they parse the documented
CSV column contract (t, per-agent positions, stacked errors, Lyapunov values,
min_dist, degeneracies) and render what is there.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class RunLogError(ValueError):
    """Malformed or contract-violating run artifact."""


@dataclass
class RunLog:
    """One simulation run: sample times, agent positions, and the logged
    scalar columns (errors, Lyapunov values, min distance)."""

    n: int
    t: np.ndarray
    positions: np.ndarray  # (rows, n, 3)
    columns: dict[str, np.ndarray]
    summary: dict | None = None

    @property
    def error_names(self) -> list[str]:
        return [c for c in self.columns if c.startswith("e_")]

    def slice_time(self, t0: float | None, t1: float | None) -> "RunLog":
        mask = np.ones_like(self.t, dtype=bool)
        if t0 is not None:
            mask &= self.t >= t0
        if t1 is not None:
            mask &= self.t <= t1
        if not np.any(mask):
            raise RunLogError(f"no samples in the requested segment [{t0}, {t1}]")
        return RunLog(
            n=self.n,
            t=self.t[mask],
            positions=self.positions[mask],
            columns={k: v[mask] for k, v in self.columns.items()},
            summary=self.summary,
        )


def _expected_scalar_columns(n: int) -> list[str]:
    cols = ["e_d", "e_xi_3", "e_eta_3"]
    for a in range(4, n + 1):
        cols += [f"e_xi_{a}", f"e_eta_{a}", f"e_phi_{a}"]
    cols += [f"W_{a}" for a in range(2, n + 1)]
    cols += ["min_dist", "degeneracies"]
    return cols


def load_run(csv_path, summary_path=None) -> RunLog:
    """Parse a run CSV (and optionally its summary JSON).

    Raises RunLogError for an empty log or for any missing contract column,
    naming the first column that is absent.
    """
    path = Path(csv_path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise RunLogError(f"{path}: empty file (no header)") from None
            rows = [row for row in reader if row]
    except OSError as exc:
        raise RunLogError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise RunLogError(f"{path}: log contains no data rows")

    if header[0] != "t":
        raise RunLogError(f"{path}: first column must be 't', got {header[0]!r}")
    agents = sorted(
        int(m.group(1)) for c in header if (m := re.fullmatch(r"x(\d+)", c))
    )
    if not agents or agents != list(range(1, agents[-1] + 1)):
        raise RunLogError(f"{path}: per-agent position columns x1..xn are incomplete")
    n = agents[-1]

    index = {name: k for k, name in enumerate(header)}
    for a in range(1, n + 1):
        for axis in ("x", "y", "z"):
            if f"{axis}{a}" not in index:
                raise RunLogError(f"{path}: missing column {axis}{a}")
    for name in _expected_scalar_columns(n):
        if name not in index:
            raise RunLogError(f"{path}: missing column {name}")

    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != len(header):
        raise RunLogError(f"{path}: ragged rows (expected {len(header)} fields)")
    positions = np.empty((data.shape[0], n, 3))
    for a in range(n):
        for ax, axis in enumerate(("x", "y", "z")):
            positions[:, a, ax] = data[:, index[f"{axis}{a + 1}"]]
    columns = {
        name: data[:, index[name]] for name in _expected_scalar_columns(n)
    }

    summary = None
    if summary_path is not None:
        try:
            summary = json.loads(Path(summary_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise RunLogError(f"cannot read summary {summary_path}: {exc}") from exc
    return RunLog(n=n, t=data[:, 0], positions=positions, columns=columns, summary=summary)


def parse_segment(text: str) -> tuple[float | None, float | None]:
    """Parse an 'a:b' time window; either side may be empty."""
    if ":" not in text:
        raise RunLogError(f"segment must look like 'a:b', got {text!r}")
    lo, hi = text.split(":", 1)
    return (float(lo) if lo else None, float(hi) if hi else None)
