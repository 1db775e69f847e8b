"""Motion-primitive milestones and strategy classification.

Milestones are zero crossings of velocity or acceleration.  A crossing only
counts once the signal has left a small band around zero on both sides
(hysteresis), and its position is the linearly interpolated root snapped to
the nearest sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NoMilestone, OrderViolation, UnsupportedStrategy
from .trialdata import StrategyTag, Trial

HYSTERESIS = 1e-3

PHASE_LABELS = {
    StrategyTag.ANKLE: ("lean_cross", "lean_recover"),
    StrategyTag.TOE: ("lift_to_tiptoe", "drop_to_sole", "lean_recover"),
    StrategyTag.ONE_STEP: ("step", "lean_after_step"),
}


@dataclass(frozen=True)
class Segmentation:
    """Phase boundaries; each breakpoint is the first sample of the next phase."""

    breakpoints: tuple
    phase_labels: tuple
    strategy: Optional[StrategyTag] = None
    n_samples: Optional[int] = None

    def __post_init__(self) -> None:
        bps = tuple(int(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "phase_labels", tuple(self.phase_labels))
        if len(self.phase_labels) != len(bps) + 1:
            raise ValueError("phase count must equal breakpoint count + 1")
        if any(b <= a for a, b in zip(bps, bps[1:])) or (bps and bps[0] <= 0):
            raise ValueError(f"breakpoints must be positive and strictly increasing: {bps}")
        if self.n_samples is not None and bps and bps[-1] >= self.n_samples:
            raise ValueError("breakpoints must lie inside the trial")
        expected = PHASE_LABELS.get(self.strategy) if self.strategy else None
        if expected is not None and len(expected) != len(self.phase_labels):
            raise ValueError(f"{self.strategy.value} has {len(expected)} phases")

    @classmethod
    def single(cls, n_samples: int, label: str = "full") -> "Segmentation":
        return cls((), (label,), None, n_samples)

    def bounds(self, n_samples: int) -> list[tuple[int, int]]:
        edges = [0, *self.breakpoints, n_samples]
        return list(zip(edges, edges[1:]))

    def to_dict(self, trial_id: str) -> dict:
        return {
            "trial_id": trial_id,
            "strategy": self.strategy.value if self.strategy else None,
            "breakpoints": list(self.breakpoints),
            "labels": list(self.phase_labels),
        }


@dataclass(frozen=True)
class ClassifierParams:
    """Feature thresholds for :func:`classify_strategy`.

    A valley is a maximal run with acceleration below ``-valley_depth``.
    The toe rise is an acceleration increase of more than ``rise_rate``
    within ``rise_window`` seconds, occurring before the first valley.
    """

    valley_depth: float = 1.0
    rise_rate: float = 0.5
    rise_window: float = 0.2


def _snap(x: np.ndarray, j: int) -> int:
    """Nearest sample to the root of the segment between ``j`` and ``j + 1``."""
    denom = x[j] - x[j + 1]
    frac = x[j] / denom if denom != 0 else 0.0
    return int(math.floor(j + frac + 0.5))


def crossings(x, band: float = HYSTERESIS) -> list[tuple[int, int]]:
    """All hysteresis zero crossings of ``x`` as ``(index, direction)``.

    ``direction`` is +1 for negative-to-positive and -1 for the reverse.
    """
    x = np.asarray(x, dtype=float)
    side = np.where(x > band, 1, np.where(x < -band, -1, 0))
    out_idx = np.flatnonzero(side)
    events = []
    for prev, cur in zip(out_idx, out_idx[1:]):
        s_prev, s_cur = side[prev], side[cur]
        if s_prev == s_cur:
            continue
        seg = s_prev * x[prev:cur + 1]
        # first sample pair where the signal leaves the starting side
        j = prev + int(np.flatnonzero((seg[:-1] > 0) & (seg[1:] <= 0))[0])
        events.append((_snap(x, j), int(s_cur)))
    return events


def first_zero(x, band: float = HYSTERESIS, start: int = 0) -> int:
    """First index from ``start`` where ``x`` reaches zero.

    A sign change gives the snapped interpolated root; a dip into the band
    that returns without changing sign gives the sample closest to zero.
    """
    x = np.asarray(x, dtype=float)
    outside = np.flatnonzero(np.abs(x[start:]) > band)
    if outside.size == 0:
        raise NoMilestone("signal never leaves the zero band")
    i0 = start + int(outside[0])
    s = 1.0 if x[i0] > 0 else -1.0
    entered = np.flatnonzero(s * x[i0:] <= band)
    if entered.size == 0:
        raise NoMilestone("signal never reaches zero")
    i = i0 + int(entered[0])
    later = np.flatnonzero(np.abs(x[i:]) > band)
    end = i + int(later[0]) if later.size else len(x) - 1
    seg = s * x[i - 1:end + 1]
    changes = np.flatnonzero((seg[:-1] > 0) & (seg[1:] <= 0))
    if changes.size:
        return _snap(x, i - 1 + int(changes[0]))
    return i + int(np.argmin(np.abs(x[i:end + 1])))


def _check_index(index: int, n: int, what: str) -> int:
    if not 0 < index < n:
        raise NoMilestone(f"{what} falls on the trial boundary (index {index})")
    return index


def segment_ankle(trial: Trial, band: float = HYSTERESIS) -> Segmentation:
    """Split at the first negative-to-positive acceleration crossing."""
    trial.require_kinematics(velocity=False, acceleration=True)
    ups = [i for i, d in crossings(trial.acceleration, band) if d > 0]
    if not ups:
        raise NoMilestone("acceleration never changes sign from negative to positive")
    bp = _check_index(ups[0], len(trial), "ankle milestone")
    return Segmentation((bp,), PHASE_LABELS[StrategyTag.ANKLE], StrategyTag.ANKLE, len(trial))


def segment_toe(trial: Trial, band: float = HYSTERESIS) -> Segmentation:
    """Split where velocity first reaches zero, then where acceleration next crosses zero."""
    trial.require_kinematics(velocity=True, acceleration=True)
    n = len(trial)
    bp1 = _check_index(first_zero(trial.velocity, band), n, "zero-velocity milestone")
    events = crossings(trial.acceleration[bp1:], band)
    if not events:
        raise NoMilestone("acceleration does not cross zero after the zero-velocity point")
    bp2 = bp1 + events[0][0]
    if bp2 <= bp1:
        raise OrderViolation(f"acceleration milestone {bp2} not after velocity milestone {bp1}")
    bp2 = _check_index(bp2, n, "zero-acceleration milestone")
    return Segmentation((bp1, bp2), PHASE_LABELS[StrategyTag.TOE], StrategyTag.TOE, n)


def segment_one_step(trial: Trial, band: float = HYSTERESIS) -> Segmentation:
    """Split at the first upward acceleration crossing after the global minimum."""
    trial.require_kinematics(velocity=False, acceleration=True)
    a = trial.acceleration
    low = int(np.argmin(a))
    if a[low] >= -band:
        raise NoMilestone("acceleration has no negative valley")
    ups = [i for i, d in crossings(a[low:], band) if d > 0]
    if not ups:
        raise NoMilestone("acceleration does not recover above zero after its minimum")
    bp = _check_index(low + ups[0], len(trial), "step milestone")
    return Segmentation((bp,), PHASE_LABELS[StrategyTag.ONE_STEP], StrategyTag.ONE_STEP, len(trial))


_SEGMENTERS = {
    StrategyTag.ANKLE: segment_ankle,
    StrategyTag.TOE: segment_toe,
    StrategyTag.ONE_STEP: segment_one_step,
}


def segment(trial: Trial, strategy: Optional[StrategyTag] = None,
            band: float = HYSTERESIS) -> Segmentation:
    tag = strategy or trial.strategy
    if tag is None:
        raise UnsupportedStrategy(f"trial {trial.id!r} carries no strategy tag")
    if tag not in _SEGMENTERS:
        raise UnsupportedStrategy(f"{tag.value} trials are not segmented (combined strategy)")
    return _SEGMENTERS[tag](trial, band)


def valley_runs(a, depth: float) -> list[tuple[int, int]]:
    """Maximal ``[start, end)`` runs where ``a < -depth``."""
    below = np.concatenate([[False], np.asarray(a) < -depth, [False]])
    edges = np.flatnonzero(np.diff(below.astype(np.int8)))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def max_rise(a, window: int) -> float:
    """Largest increase ``a[i + j] - a[i]`` over ``0 < j <= window``."""
    a = np.asarray(a, dtype=float)
    if len(a) < 2 or window < 1:
        return 0.0
    w = min(window, len(a) - 1)
    padded = np.concatenate([a, np.full(w, -np.inf)])
    ahead = sliding_window_view(padded[1:], w)[: len(a)].max(axis=1)
    return float(np.max(ahead - a))


def trajectory_features(trial: Trial, params: ClassifierParams = ClassifierParams()) -> dict:
    trial.require_kinematics(velocity=True, acceleration=True)
    a = trial.acceleration
    valleys = valley_runs(a, params.valley_depth)
    before = a[: valleys[0][0]] if valleys else a
    window = max(1, int(round(params.rise_window / trial.dt)))
    rise = max_rise(before, window)
    return {"n_valleys": len(valleys), "valleys": valleys, "max_rise": rise,
            "toe_rise": rise > params.rise_rate}


def classify_strategy(trial: Trial, params: ClassifierParams = ClassifierParams()) -> StrategyTag:
    features = trajectory_features(trial, params)
    n_valleys, toe_rise = features["n_valleys"], features["toe_rise"]
    if n_valleys >= 2:
        return StrategyTag.TWO_STEP
    if n_valleys == 1:
        return StrategyTag.TOE_TO_STEP if toe_rise else StrategyTag.ONE_STEP
    return StrategyTag.TOE if toe_rise else StrategyTag.ANKLE
