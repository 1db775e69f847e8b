"""Group statistics over fits and initial-state (strategy selection) statistics.

Fit groups are summarised by mean and mean absolute deviation about the
mean.  Initial states are summarised per strategy and start-mode cohort by
the componentwise median and the median absolute deviation about it, which
is far less sensitive to the occasional outlier trial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyGroup, InvalidTrial, MixedSpec
from .fitlaw import FitResult, SegmentFit
from .trialdata import StartMode, StrategyTag, Trial

COHORTS = ("all", "informed", "random")
METRICS = ("rms", "r2")


def mean_mad(values: Sequence[float]) -> tuple[float, float]:
    """Mean and mean absolute deviation about the mean (order independent)."""
    values = [float(v) for v in values]
    if not values:
        raise EmptyGroup("cannot summarise an empty group")
    if min(values) == max(values):  # exact, free of summation rounding
        return values[0], 0.0
    mean = math.fsum(values) / len(values)
    return mean, math.fsum(abs(v - mean) for v in values) / len(values)


def median_mad(values: Sequence[float]) -> tuple[float, float]:
    """Median and median absolute deviation about the median."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyGroup("cannot summarise an empty group")
    med = float(np.median(x))
    return med, float(np.median(np.abs(x - med)))


# ------------------------------------------------------------------ fit groups


@dataclass(frozen=True)
class GroupStats:
    """Mean/MAD of every fitted parameter and metric in one group.

    ``params`` and ``metrics`` map a name to ``(mean, mad)``.
    """

    key: str
    spec_label: str
    params: dict
    metrics: dict
    n_trials: int

    def to_dict(self) -> dict:
        pair = lambda mm: {"mean": mm[0], "mad": mm[1]}  # noqa: E731
        return {
            "group": self.key,
            "spec": self.spec_label,
            "n_trials": self.n_trials,
            "params": {k: pair(v) for k, v in self.params.items()},
            "metrics": {k: pair(v) for k, v in self.metrics.items()},
        }


def _as_fit(result) -> FitResult:
    if isinstance(result, SegmentFit):
        raise TypeError("pass individual phase fits, keyed by strategy and phase")
    return result


def group_fit_stats(results: Iterable[tuple[str, FitResult]]) -> list[GroupStats]:
    """Summarise ``(group_key, FitResult)`` pairs, one GroupStats per key.

    Groups come back sorted by key so the output does not depend on the
    order in which trials were processed.
    """
    groups: dict[str, list[FitResult]] = {}
    for key, result in results:
        groups.setdefault(str(key), []).append(_as_fit(result))
    if not groups:
        raise EmptyGroup("no fit results to summarise")
    out = []
    for key in sorted(groups):
        members = groups[key]
        spec = members[0].spec
        if any(m.spec != spec for m in members[1:]):
            labels = sorted({m.spec.label for m in members})
            raise MixedSpec(f"group {key!r} mixes control-law specs: {labels}")
        columns = members[0].columns
        params = {c: mean_mad([m.gains[c] for m in members]) for c in columns}
        metrics = {name: mean_mad([getattr(m, name) for m in members]) for name in METRICS}
        out.append(GroupStats(key, spec.label, params, metrics, len(members)))
    return out


# ------------------------------------------------------------------ stable region


@dataclass(frozen=True)
class StableRegion:
    """Band ``slope*p - half_width <= v <= slope*p + half_width`` in the (p, v) plane."""

    slope: float = -3.0
    half_width: float = 0.3

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def boundaries(self, p) -> tuple[np.ndarray, np.ndarray]:
        centre = self.slope * np.asarray(p, dtype=float)
        return centre - self.half_width, centre + self.half_width


def in_stable_region(p: float, v: float, region: StableRegion = StableRegion()) -> bool:
    """Whether ``(p, v)`` lies inside the band, boundaries included."""
    centre = region.slope * p
    return bool(centre - region.half_width <= v <= centre + region.half_width)


def initial_state(trial: Trial, absolute: bool = False) -> tuple[float, float]:
    """First position and velocity sample.

    With ``absolute`` the origin offset removed by an earlier shift is added
    back, recovering the pre-shift position.
    """
    trial.require_kinematics(velocity=True, acceleration=False)
    p0 = float(trial.position[0]) + (trial.origin_offset if absolute else 0.0)
    return p0, float(trial.velocity[0])


# ------------------------------------------------------------------ selection stats


@dataclass(frozen=True)
class SelectionEntry:
    strategy: StrategyTag
    cohort: str
    n_trials: int
    median: tuple
    mad: tuple

    def to_dict(self) -> dict:
        return {"strategy": self.strategy.value, "cohort": self.cohort, "n_trials": self.n_trials,
                "median": list(self.median), "mad_median": list(self.mad)}


@dataclass(frozen=True)
class SelectionStats:
    """Median/MAD of initial (p0, v0) per strategy and cohort; empty cells are absent."""

    entries: tuple

    def get(self, strategy: StrategyTag, cohort: str = "all") -> Optional[SelectionEntry]:
        for entry in self.entries:
            if entry.strategy is strategy and entry.cohort == cohort:
                return entry
        return None

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}


def _cohort_of(mode: StartMode) -> Optional[str]:
    return {StartMode.INFORMED: "informed", StartMode.RANDOM: "random"}.get(mode)


def selection_stats(trials: Iterable[Trial], absolute: bool = False) -> SelectionStats:
    """Strategy-selection statistics over non-abandoned trials.

    Trials with an unknown start mode contribute to the ``all`` cohort only.
    """
    cells: dict[tuple[StrategyTag, str], list[tuple[float, float]]] = {}
    for trial in trials:
        if trial.abandoned:
            continue
        if trial.strategy is None:
            raise InvalidTrial(f"trial {trial.id!r} has no strategy tag")
        state = initial_state(trial, absolute)
        cells.setdefault((trial.strategy, "all"), []).append(state)
        cohort = _cohort_of(trial.start_mode)
        if cohort:
            cells.setdefault((trial.strategy, cohort), []).append(state)
    entries = []
    for tag in StrategyTag:
        for cohort in COHORTS:
            states = cells.get((tag, cohort))
            if not states:
                continue
            (mp, dp), (mv, dv) = (median_mad([s[i] for s in states]) for i in (0, 1))
            entries.append(SelectionEntry(tag, cohort, len(states), (mp, mv), (dp, dv)))
    return SelectionStats(tuple(entries))


# ------------------------------------------------------------------ text tables


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def format_fit_table(stats: Sequence[GroupStats]) -> str:
    """Aligned tables, one per control-law spec: a row per group, Mean/MAD per field."""
    if not stats:
        raise EmptyGroup("no groups to tabulate")
    blocks = []
    for label in sorted({g.spec_label for g in stats}):
        members = [g for g in stats if g.spec_label == label]
        fields = [*members[0].params, *METRICS]
        rows = [[label, "n"] + [f"{f} {s}" for f in fields for s in ("mean", "MAD")]]
        for g in members:
            row = [g.key, str(g.n_trials)]
            for f in fields:
                mean, mad = g.params.get(f) or g.metrics[f]
                row += [f"{mean:.4f}", f"{mad:.4f}"]
            rows.append(row)
        blocks.append(_align(rows))
    return "\n".join(blocks)


def format_selection_table(stats: SelectionStats) -> str:
    """Three sub-tables (all / informed / random), strategies as columns."""
    blocks = []
    for cohort in COHORTS:
        tags = [t for t in StrategyTag if stats.get(t, cohort)]
        if not tags:
            continue
        rows = [[f"{cohort} trials (m, m/s)", *[t.value for t in tags]]]
        for name, attr in (("median", "median"), ("MAD_median", "mad")):
            rows.append([name, *[", ".join(f"{x:.4f}" for x in getattr(stats.get(t, cohort), attr))
                                 for t in tags]])
        rows.append(["n", *[str(stats.get(t, cohort).n_trials) for t in tags]])
        blocks.append(_align(rows))
    return "\n".join(blocks)
