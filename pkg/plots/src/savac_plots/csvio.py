"""Readers for the solver's CSV outputs.

Headers must match the documented schemas exactly; every parse problem is
reported with the offending line number (the header is line 1).  The order
columns of eoc.csv and rtrack.csv are ignored on input, the figures
recompute slopes from the raw errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PlotError

EOC_HEADER = "level,h,tau,E_L2,EOC_L2,E_H1,EOC_H1,E_tot,EOC_tot,samples"
TRACKING_HEADER = "tau,mean_max_tracking_error,observed_order"
FIELD_HEADER = "node_index,x,y,phi"
FIELD_1D_HEADER = "node_index,x,phi"

ERROR_COLUMNS = ("E_L2", "E_H1", "E_tot")


@dataclass(frozen=True)
class LadderTable:
    """Errors of a refinement ladder, rows finest first."""

    levels: tuple
    taus: np.ndarray
    errors: dict  # column name -> np.ndarray


@dataclass(frozen=True)
class TrackingTable:
    """Tracking errors under step refinement, largest step first."""

    taus: np.ndarray
    errors: np.ndarray


@dataclass(frozen=True)
class FieldGrid:
    """Nodal values on the uniform periodic grid, indexed [iy, ix]."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray


def _read_lines(path) -> list:
    lines = Path(path).read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise PlotError(f"{path}: file is empty")
    return lines


def _rows(lines: list, header: str, path) -> list:
    if lines[0] != header:
        raise PlotError(
            f"{path}: line 1: expected header {header!r}, got {lines[0]!r}"
        )
    if len(lines) < 2:
        raise PlotError(f"{path}: no data rows")
    n_fields = header.count(",") + 1
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n_fields:
            raise PlotError(
                f"{path}: line {lineno}: expected {n_fields} fields, "
                f"got {len(parts)}"
            )
        rows.append((lineno, parts))
    return rows


def _number(raw: str, path, lineno: int, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise PlotError(
            f"{path}: line {lineno}: {name} value {raw!r} is not a number"
        ) from None


def _positive(raw: str, path, lineno: int, name: str) -> float:
    value = _number(raw, path, lineno, name)
    if not (np.isfinite(value) and value > 0.0):
        raise PlotError(
            f"{path}: line {lineno}: {name} must be positive and finite "
            f"for a log-log plot, got {raw!r}"
        )
    return value


def read_eoc(path) -> LadderTable:
    """Ladder errors from eoc.csv; needs at least two rows for slopes."""
    rows = _rows(_read_lines(path), EOC_HEADER, path)
    if len(rows) < 2:
        raise PlotError(f"{path}: need at least two rows to compute slopes")
    levels = []
    taus = []
    errors = {name: [] for name in ERROR_COLUMNS}
    for lineno, parts in rows:
        levels.append(parts[0])
        taus.append(_positive(parts[2], path, lineno, "tau"))
        errors["E_L2"].append(_positive(parts[3], path, lineno, "E_L2"))
        errors["E_H1"].append(_positive(parts[5], path, lineno, "E_H1"))
        errors["E_tot"].append(_positive(parts[7], path, lineno, "E_tot"))
    return LadderTable(
        levels=tuple(levels),
        taus=np.array(taus),
        errors={name: np.array(vals) for name, vals in errors.items()},
    )


def read_tracking(path) -> TrackingTable:
    rows = _rows(_read_lines(path), TRACKING_HEADER, path)
    if len(rows) < 2:
        raise PlotError(f"{path}: need at least two rows to compute slopes")
    taus = []
    errors = []
    for lineno, parts in rows:
        taus.append(_positive(parts[0], path, lineno, "tau"))
        errors.append(_positive(parts[1], path, lineno,
                                "mean_max_tracking_error"))
    return TrackingTable(taus=np.array(taus), errors=np.array(errors))


def read_field(path) -> FieldGrid:
    """Nodal field from field_NNNNNN.csv, rebuilt into its square grid.

    The grid is recovered from the coordinates themselves, so row order in
    the file does not matter; the file must cover every node of a uniform
    m x m grid on [0, 1) exactly once.
    """
    lines = _read_lines(path)
    if lines[0] == FIELD_1D_HEADER:
        raise PlotError(
            f"{path}: 1-D field file (no y column); heatmaps need a 2-D field"
        )
    rows = _rows(lines, FIELD_HEADER, path)
    n = len(rows)
    m = int(round(np.sqrt(n)))
    if m * m != n:
        raise PlotError(f"{path}: {n} rows do not form a square grid")
    h = 1.0 / m
    values = np.empty((m, m))
    seen = np.zeros((m, m), dtype=bool)
    for lineno, parts in rows:
        if not parts[0].isdigit():
            raise PlotError(
                f"{path}: line {lineno}: node_index {parts[0]!r} is not a "
                f"nonnegative integer"
            )
        x = _number(parts[1], path, lineno, "x")
        y = _number(parts[2], path, lineno, "y")
        phi = _number(parts[3], path, lineno, "phi")
        ix = int(round(x / h))
        iy = int(round(y / h))
        if not (0 <= ix < m and 0 <= iy < m
                and abs(x - ix * h) <= 1e-9 and abs(y - iy * h) <= 1e-9):
            raise PlotError(
                f"{path}: line {lineno}: node ({x}, {y}) is not on the "
                f"uniform {m} x {m} grid"
            )
        if seen[iy, ix]:
            raise PlotError(
                f"{path}: line {lineno}: duplicate node at ({x}, {y})"
            )
        seen[iy, ix] = True
        values[iy, ix] = phi
    return FieldGrid(x=h * np.arange(m), y=h * np.arange(m), values=values)
