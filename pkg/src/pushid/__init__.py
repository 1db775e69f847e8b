"""Identify PID-family balance controllers from centre-of-mass push-recovery trials."""
from .errors import PushIdError
from .fitlaw import ControlLawSpec, FitResult, SegmentFit, fit_segments, fit_trial, ridge_solve
from .segment import Segmentation, classify_strategy, segment
from .signal import FilterSpec, butterworth_lowpass, derive_kinematics
from .simulate import GainSchedule, GainSet, simulate_trial, synth_archetype
from .stats import StableRegion, group_fit_stats, in_stable_region, selection_stats
from .trialdata import ReferenceState, StartMode, StrategyTag, Trial, load_trial, save_trial

__version__ = "0.1.0"

__all__ = [
    "ControlLawSpec", "FilterSpec", "FitResult", "GainSchedule", "GainSet", "PushIdError",
    "ReferenceState", "SegmentFit", "Segmentation", "StableRegion", "StartMode", "StrategyTag",
    "Trial", "butterworth_lowpass", "classify_strategy", "derive_kinematics", "fit_segments",
    "fit_trial", "group_fit_stats", "in_stable_region", "load_trial", "ridge_solve", "save_trial",
    "segment", "selection_stats", "simulate_trial", "synth_archetype",
]
