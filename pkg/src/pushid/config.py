"""Run configuration: a flat key-value file (YAML or JSON) plus CLI overrides.

Everything is validated up front so that a bad setting fails before any
trial is touched.  ``RunConfig.to_dict`` is embedded in every report.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError, PushIdError
from .fitlaw import ControlLawSpec, DEFAULT_LAMBDA
from .segment import ClassifierParams
from .signal import FilterSpec
from .simulate import DEFAULT_DT, DEFAULT_OUTPUT_DT, ArchetypeParams, PdTrialParams

DEFAULT_SPECS = ("P-linear", "PI-linear", "PD-linear", "PID-linear",
                 "PD-polynomial", "PD-exponential")
SIM_STRATEGIES = ("ankle", "toe", "toe-to-step", "one-step", "two-step", "all", "pd")
DERIVE_MODES = ("auto", "always", "never")
START_MODES = ("any", "informed", "random")


def parse_spec(text: str, lam: float, derivative_powers: bool = False) -> ControlLawSpec:
    """``"PD"``, ``"PD-linear"`` or ``"PD:Polynomial"`` to a ControlLawSpec."""
    law, _, metric = str(text).replace(":", "-").partition("-")
    return ControlLawSpec.parse(law, metric or "Linear", lam, derivative_powers)


@dataclass(frozen=True)
class RunConfig:
    # preprocessing
    filter_enabled: bool = True
    filter_order: int = 4
    filter_cutoff_hz: float = 30.0
    zero_phase: bool = True
    prefilter_hz: Optional[float] = None
    derive: str = "auto"
    shift_origin: bool = True
    speed_epsilon: float = 1e-3
    # classification
    valley_depth: float = 1.0
    rise_rate: float = 0.5
    rise_window: float = 0.2
    # fitting
    specs: tuple = DEFAULT_SPECS
    lam: float = DEFAULT_LAMBDA
    derivative_powers: bool = False
    plot_spec: str = "PD-linear"
    # cohort filters
    include_abandoned: bool = False
    start_mode: str = "any"
    # simulation
    seed: int = 0
    sim_strategy: str = "all"
    sim_n: int = 5
    sim_dt: float = DEFAULT_DT
    sim_output_dt: float = DEFAULT_OUTPUT_DT
    sim_duration: float = 5.0
    push_scale: float = 1.0
    # execution
    workers: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        self.validate()

    # -------------------------------------------------------------- validation

    def validate(self) -> None:
        def need(cond: bool, message: str) -> None:
            if not cond:
                raise ConfigError(message)

        need(self.derive in DERIVE_MODES, f"derive must be one of {DERIVE_MODES}")
        need(self.start_mode in START_MODES, f"start_mode must be one of {START_MODES}")
        need(self.sim_strategy in SIM_STRATEGIES, f"sim_strategy must be one of {SIM_STRATEGIES}")
        need(isinstance(self.sim_n, int) and self.sim_n >= 1, "sim_n must be a positive integer")
        need(isinstance(self.workers, int) and self.workers >= 1, "workers must be >= 1")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer")
        for name in ("sim_dt", "sim_output_dt", "sim_duration", "push_scale", "speed_epsilon",
                     "valley_depth", "rise_rate", "rise_window"):
            value = getattr(self, name)
            need(isinstance(value, (int, float)) and math.isfinite(value) and value > 0,
                 f"{name} must be a positive number, got {value!r}")
        ratio = self.sim_output_dt / self.sim_dt
        need(abs(ratio - round(ratio)) <= 1e-9 * ratio and round(ratio) >= 1,
             "sim_output_dt must be an integer multiple of sim_dt")
        need(self.sim_duration >= 2 * self.sim_output_dt, "sim_duration too short")
        need(len(self.specs) > 0, "at least one control-law spec is required")
        try:
            self.filter_spec(1000.0)
            if self.prefilter_hz is not None:
                FilterSpec(1000.0, self.filter_order, self.prefilter_hz)
            self.control_specs()
            parse_spec(self.plot_spec, self.lam)
            ClassifierParams(self.valley_depth, self.rise_rate, self.rise_window)
        except (PushIdError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    # -------------------------------------------------------------- module views

    def filter_spec(self, sample_rate_hz: float) -> Optional[FilterSpec]:
        if not self.filter_enabled:
            return None
        return FilterSpec(sample_rate_hz, self.filter_order, self.filter_cutoff_hz, self.zero_phase)

    def control_specs(self) -> list[ControlLawSpec]:
        out = [parse_spec(s, self.lam, self.derivative_powers) for s in self.specs]
        labels = [s.label for s in out]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate control-law specs: {labels}")
        return out

    def classifier(self) -> ClassifierParams:
        return ClassifierParams(self.valley_depth, self.rise_rate, self.rise_window)

    def archetype_params(self) -> ArchetypeParams:
        return ArchetypeParams(valley_depth=self.valley_depth, duration=self.sim_duration,
                               dt=self.sim_dt, output_dt=self.sim_output_dt,
                               push_scale=self.push_scale)

    def pd_params(self) -> PdTrialParams:
        return PdTrialParams(duration=self.sim_duration, dt=self.sim_dt,
                             output_dt=self.sim_output_dt)

    # -------------------------------------------------------------- I/O

    def to_dict(self) -> dict:
        out = asdict(self)
        out["specs"] = list(self.specs)
        return out

    def updated(self, **overrides) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return replace(self, **overrides)
        except TypeError as exc:  # e.g. comparing a string with a number
            raise ConfigError(str(exc)) from exc


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        except (ValueError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a key-value mapping")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "lambda" in values:
        values["lam"] = values.pop("lambda")
    if isinstance(values.get("specs"), str):
        values["specs"] = [s.strip() for s in values["specs"].split(",") if s.strip()]
    return RunConfig().updated(**values)
