"""Trajectory conditioning: low-pass filtering, differentiation and trimming."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import signal as sps

from .errors import EmptyResult, IndexOutOfRange, InvalidSpec, NoStopDetected, TooShort
from .trialdata import TreadmillLog, Trial

SPEED_EPSILON = 1e-3


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth low-pass settings (4th order, 30 Hz by default)."""

    sample_rate_hz: float
    order: int = 4
    cutoff_hz: float = 30.0
    zero_phase: bool = True

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 1:
            raise InvalidSpec(f"filter order must be a positive integer, got {self.order}")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise InvalidSpec("sample rate must be positive")
        nyquist = self.sample_rate_hz / 2
        if not 0 < self.cutoff_hz < nyquist:
            raise InvalidSpec(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {nyquist}) Hz for fs={self.sample_rate_hz}")

    @classmethod
    def for_trial(cls, trial: Trial, **kwargs) -> "FilterSpec":
        return cls(sample_rate_hz=trial.sample_rate, **kwargs)

    @property
    def pad_length(self) -> int:
        return 3 * int(self.order)


def butterworth_lowpass(x, spec: FilterSpec) -> np.ndarray:
    """Low-pass ``x``; forward-backward when ``spec.zero_phase``.

    Edges are extended by odd reflection over ``3 * order`` samples.  The
    single-pass filter starts from the steady state of the first sample so
    a constant input passes unchanged.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < spec.pad_length:
        raise TooShort(f"need at least {spec.pad_length} samples, got {x.size}")
    sos = sps.butter(int(spec.order), spec.cutoff_hz, btype="low", fs=spec.sample_rate_hz,
                     output="sos")
    if spec.zero_phase:
        padlen = min(spec.pad_length, len(x) - 1)
        return sps.sosfiltfilt(sos, x, padtype="odd", padlen=padlen)
    zi = sps.sosfilt_zi(sos) * x[0]
    y, _ = sps.sosfilt(sos, x, zi=zi)
    return y


def differentiate(x, dt: float) -> np.ndarray:
    """Central differences inside, second-order one-sided stencils at the ends."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise TooShort("differentiation needs at least 3 samples")
    if not dt > 0:
        raise InvalidSpec("dt must be positive")
    return np.gradient(x, dt, edge_order=2)


def derive_kinematics(trial: Trial, filter: Optional[FilterSpec] = None,
                      prefilter_hz: Optional[float] = None) -> Trial:
    """Filter position, then derive velocity and acceleration from it.

    Any velocity/acceleration already on the trial is replaced.  ``filter``
    of ``None`` skips filtering; ``prefilter_hz`` adds an extra zero-phase
    pass of the same order before the main one.
    """
    position = np.asarray(trial.position, dtype=float)
    if prefilter_hz is not None:
        pre = FilterSpec(trial.sample_rate, order=filter.order if filter else 4,
                         cutoff_hz=prefilter_hz, zero_phase=True)
        position = butterworth_lowpass(position, pre)
    if filter is not None:
        if abs(filter.sample_rate_hz - trial.sample_rate) > 1e-6 * trial.sample_rate:
            raise InvalidSpec(
                f"filter sample rate {filter.sample_rate_hz} Hz does not match trial "
                f"rate {trial.sample_rate:.6g} Hz")
        position = butterworth_lowpass(position, filter)
    velocity = differentiate(position, trial.dt)
    acceleration = differentiate(velocity, trial.dt)
    return replace(trial, position=position, velocity=velocity, acceleration=acceleration)


def find_stop_time(log: TreadmillLog, speed_epsilon: float = SPEED_EPSILON) -> float:
    """Time of the first sample at or below ``speed_epsilon`` after a moving sample."""
    moving = log.speed > speed_epsilon
    stopped = ~moving
    hits = np.flatnonzero(stopped[1:] & moving[:-1])
    if hits.size == 0:
        raise NoStopDetected("treadmill speed never drops to zero after moving")
    return float(log.time[hits[0] + 1])


def trim_to_push(trial: Trial, log: TreadmillLog, speed_epsilon: float = SPEED_EPSILON) -> Trial:
    """Drop samples recorded before the treadmill came to rest."""
    stop = find_stop_time(log, speed_epsilon)
    slack = 1e-9 * trial.dt
    start = int(np.searchsorted(trial.time, stop - slack, side="left"))
    if start >= len(trial):
        raise EmptyResult(f"treadmill stops at {stop:.4f} s, after the trial ends")
    if len(trial) - start < 3:
        raise EmptyResult("fewer than 3 samples remain after the treadmill stop")
    return trial.slice(start, len(trial))


def shift_origin(trial: Trial) -> Trial:
    """Move the position origin to the first sample, tracking the offset."""
    p0 = float(trial.position[0])
    return replace(trial, position=trial.position - p0, origin_offset=trial.origin_offset + p0)


def manual_trim(trial: Trial, start_index: int, end_index: int) -> Trial:
    if not 0 <= start_index < end_index <= len(trial):
        raise IndexOutOfRange(
            f"trim range [{start_index}, {end_index}) invalid for length {len(trial)}")
    return trial.slice(start_index, end_index)
