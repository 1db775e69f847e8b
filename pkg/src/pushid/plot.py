"""SVG figures plus a CSV dump of every plotted series.

Figures are built with the object-oriented matplotlib API (no pyplot
state), so they are safe to produce from worker threads.  SVG output is
byte-stable: the element-id hash salt is fixed and the date stamp dropped.
Semantic elements carry ``gid`` attributes (``breakpoint-<i>``,
``stable-boundary-lower``/``-upper``) so they can be located in the SVG.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .errors import EmptyPlot
from .stats import StableRegion
from .trialdata import Trial

_RC = {"svg.hashsalt": "pushid", "svg.fonttype": "path", "path.simplify": False}
_VIEWS = {"position": ("position", "position (m)"), "velocity": ("velocity", "velocity (m/s)")}


@dataclass(frozen=True)
class Series:
    figure: str
    name: str
    x: np.ndarray
    y: np.ndarray


def projection_figure(trial: Trial, view: str, predicted: Optional[np.ndarray] = None,
                      breakpoints: Sequence[int] = ()) -> tuple[Figure, list[Series]]:
    """Acceleration against position or velocity, with fit and breakpoints."""
    if view not in _VIEWS:
        raise ValueError(f"view must be one of {sorted(_VIEWS)}")
    trial.require_kinematics(velocity=True, acceleration=True)
    if len(trial) == 0:
        raise EmptyPlot("trial has no samples")
    attr, xlabel = _VIEWS[view]
    x = np.asarray(getattr(trial, attr))
    a = np.asarray(trial.acceleration)
    name = f"{trial.id}-{view}"

    fig = Figure(figsize=(6, 4.5))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    series = [Series(name, "observed", x, a)]
    ax.plot(x, a, color="0.25", lw=1.2, label="observed", gid="observed")
    if predicted is not None:
        predicted = np.asarray(predicted, dtype=float)
        ax.plot(x, predicted, color="tab:red", lw=1.2, ls="--", label="fitted model", gid="fitted")
        series.append(Series(name, "fitted", x, predicted))
    for i, bp in enumerate(breakpoints):
        ax.plot([x[bp]], [a[bp]], marker="o", ms=7, ls="none", color="tab:blue",
                label="breakpoint" if i == 0 else None, gid=f"breakpoint-{i}")
        series.append(Series(name, f"breakpoint-{i}", x[bp:bp + 1], a[bp:bp + 1]))
    ax.axhline(0.0, color="0.7", lw=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("acceleration (m/s²)")
    ax.set_title(f"{trial.id}: {view}-acceleration")
    ax.legend(loc="upper right", fontsize=8)
    fig.subplots_adjust(left=0.14, right=0.97, bottom=0.12, top=0.92)
    return fig, series


def initial_state_figure(states: Sequence[tuple[float, float, str]],
                         region: StableRegion = StableRegion()) -> tuple[Figure, list[Series]]:
    """Scatter of initial (p0, v0) grouped by label, with the stable band edges."""
    if not states:
        raise EmptyPlot("no initial states to plot")
    p = np.array([s[0] for s in states], dtype=float)
    v = np.array([s[1] for s in states], dtype=float)
    labels = [str(s[2]) for s in states]
    span = max(float(np.ptp(p)), 0.05)
    xs = np.array([p.min() - 0.2 * span, p.max() + 0.2 * span])
    lower, upper = region.boundaries(xs)

    fig = Figure(figsize=(6, 4.5))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    series = []
    for label in sorted(set(labels)):
        mask = np.array([lab == label for lab in labels])
        ax.scatter(p[mask], v[mask], s=18, label=label, gid=f"states-{label}")
        series.append(Series("initial-states", f"states-{label}", p[mask], v[mask]))
    for name, ys in (("stable-boundary-lower", lower), ("stable-boundary-upper", upper)):
        ax.plot(xs, ys, ls="--", color="0.3", lw=1.0, gid=name)
        series.append(Series("initial-states", name, xs, ys))
    ax.set_xlabel("initial position p0 (m)")
    ax.set_ylabel("initial velocity v0 (m/s)")
    ax.legend(loc="upper right", fontsize=8)
    fig.subplots_adjust(left=0.14, right=0.97, bottom=0.12, top=0.92)
    return fig, series


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def write_series_csv(series: Sequence[Series], path) -> Path:
    """Long-format CSV: ``figure,series,index,x,y``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["figure", "series", "index", "x", "y"])
        for s in series:
            for i, (x, y) in enumerate(zip(s.x, s.y)):
                out.writerow([s.figure, s.name, i, repr(float(x)), repr(float(y))])
    return path
