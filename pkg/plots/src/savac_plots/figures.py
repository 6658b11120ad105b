"""Figure builders.

Every function writes the image (PNG or SVG by extension) and returns the
numbers it drew, so callers and tests see exactly what is on the figure.
Output is deterministic: no embedded dates, fixed SVG hash salt, fixed dpi.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .csvio import ERROR_COLUMNS, read_eoc, read_field, read_tracking
from .errors import PlotError

FIELD_RANGE = (-1.1, 1.1)
_SVG_SALT = "savac-plots"


@dataclass(frozen=True)
class LadderFigure:
    """What the convergence plot shows.

    ``slopes[name][i]`` is the annotated observed order between rows i and
    i+1 of the input table: log2 of the coarser error over the finer one.
    ``reference`` holds the endpoints of the slope-1/2 guide line in
    (log2 tau, log2 error) coordinates.
    """

    taus: np.ndarray
    errors: dict
    slopes: dict
    reference: tuple


@dataclass(frozen=True)
class TrackingFigure:
    taus: np.ndarray
    errors: np.ndarray
    slopes: np.ndarray
    reference: tuple


@dataclass(frozen=True)
class FieldFigure:
    shape: tuple
    contours: list | None  # vertex arrays of the zero-level overlay


def observed_slopes(errors) -> np.ndarray:
    """Observed order per adjacent pair of a finest-first error column."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[1:] / e[:-1])


def _save(fig: Figure, out_path) -> None:
    path = Path(out_path)
    kind = path.suffix.lower().lstrip(".")
    if kind not in ("png", "svg"):
        raise PlotError(
            f"unsupported output format {path.suffix!r}, use .png or .svg"
        )
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT}):
        if kind == "svg":
            fig.savefig(path, format="svg", metadata={"Date": None})
        else:
            fig.savefig(path, format="png", dpi=150)


def _decay_axes(fig: Figure):
    ax = fig.add_subplot()
    ax.set_xlabel("log2 tau")
    ax.set_ylabel("log2 error")
    ax.grid(True, alpha=0.3)
    return ax


def _annotate_segments(ax, x, y, slopes) -> None:
    for i, slope in enumerate(slopes):
        ax.annotate(f"{slope:.3f}",
                    (0.5 * (x[i] + x[i + 1]), 0.5 * (y[i] + y[i + 1])),
                    textcoords="offset points", xytext=(0, 5),
                    ha="center", fontsize=8)


def _reference_line(ax, x, y_data, slope=0.5):
    """Dashed guide of the given slope, anchored below the last series."""
    y0 = float(np.min(y_data)) - 1.0
    y = y0 + slope * (x - x[-1])
    ax.plot(x, y, linestyle="--", color="0.45", linewidth=1.0,
            label=f"slope {slope:g}")
    return ((float(x[0]), float(y[0])), (float(x[-1]), float(y[-1])))


def plot_eoc(in_path, out_path) -> LadderFigure:
    """Ladder errors on log2-log2 axes with per-pair order annotations.

    The annotated values are exactly log2(e[i+1] / e[i]) of each error
    column, rows finest first.
    """
    table = read_eoc(in_path)
    fig = Figure(figsize=(6.4, 4.8), constrained_layout=True)
    ax = _decay_axes(fig)
    x = np.log2(table.taus)
    slopes = {}
    y_last = None
    for name, marker in zip(ERROR_COLUMNS, ("o", "s", "d")):
        y = np.log2(table.errors[name])
        ax.plot(x, y, marker=marker, label=name.replace("_", " "))
        slopes[name] = observed_slopes(table.errors[name])
        _annotate_segments(ax, x, y, slopes[name])
        y_last = y
    reference = _reference_line(ax, x, y_last)
    ax.legend(loc="best", fontsize=9)
    ax.set_title("strong errors vs step size")
    _save(fig, out_path)
    return LadderFigure(taus=table.taus, errors=table.errors,
                        slopes=slopes, reference=reference)


def plot_tracking(in_path, out_path) -> TrackingFigure:
    """Tracking error decay on log2-log2 axes, largest step first."""
    table = read_tracking(in_path)
    # rows go coarse to fine, so the coarser error sits at index i
    slopes = np.log2(table.errors[:-1] / table.errors[1:])
    fig = Figure(figsize=(6.4, 4.8), constrained_layout=True)
    ax = _decay_axes(fig)
    x = np.log2(table.taus)
    y = np.log2(table.errors)
    ax.plot(x, y, marker="o", label="mean max |r - sqrt(E_h)|")
    _annotate_segments(ax, x, y, slopes)
    reference = _reference_line(ax, x, y)
    ax.legend(loc="best", fontsize=9)
    ax.set_title("auxiliary tracking error vs step size")
    _save(fig, out_path)
    return TrackingFigure(taus=table.taus, errors=table.errors,
                          slopes=slopes, reference=reference)


def plot_field(in_path, out_path, contour_path=None) -> FieldFigure:
    """Heatmap of a nodal field, color range fixed to [-1.1, 1.1].

    With ``contour_path`` the zero level set of that second field is drawn
    on top; both files must cover the same grid.
    """
    field = read_field(in_path)
    overlay = read_field(contour_path) if contour_path is not None else None
    if overlay is not None and overlay.values.shape != field.values.shape:
        raise PlotError(
            f"contour grid {overlay.values.shape} does not match the field "
            f"grid {field.values.shape}"
        )
    fig = Figure(figsize=(6.0, 5.0), constrained_layout=True)
    ax = fig.add_subplot()
    mesh = ax.pcolormesh(field.x, field.y, field.values,
                         vmin=FIELD_RANGE[0], vmax=FIELD_RANGE[1],
                         shading="nearest", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label="phi")
    contours = None
    if overlay is not None:
        level_set = ax.contour(overlay.x, overlay.y, overlay.values,
                               levels=[0.0], colors="orange",
                               linewidths=1.8)
        contours = [np.asarray(seg) for seg in level_set.allsegs[0]]
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, out_path)
    return FieldFigure(shape=field.values.shape, contours=contours)
