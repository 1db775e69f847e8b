"""Trial data model plus CSV/JSON ingestion and serialization.

A trial CSV looks like::

    #id=s01_t07
    #mass_kg=70.0
    #strategy=Toe
    #start_mode=informed
    #abandoned=false
    time_s,position_m,velocity_mps,acceleration_mps2
    0.0,0.0,0.17,-0.52
    ...

Velocity and acceleration columns are optional; ``#key=value`` lines carry
the metadata so the numeric block stays rectangular.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    InvalidTrial,
    MalformedCsv,
    MissingKinematics,
    NonFiniteValue,
    NonUniformTimestep,
)

DT_RELATIVE_TOLERANCE = 1e-9
MIN_TRIAL_LENGTH = 3

TRIAL_COLUMNS = ("time_s", "position_m", "velocity_mps", "acceleration_mps2")
TREADMILL_COLUMNS = ("time_s", "speed_mps")


class StrategyTag(str, enum.Enum):
    ANKLE = "Ankle"
    TOE = "Toe"
    TOE_TO_STEP = "ToeToStep"
    ONE_STEP = "OneStep"
    TWO_STEP = "TwoStep"

    @classmethod
    def parse(cls, text: str) -> "StrategyTag":
        """Accept ``Ankle``, ``ankle``, ``toe-to-step``, ``one_step`` etc."""
        key = text.strip().replace("-", "").replace("_", "").lower()
        for tag in cls:
            if tag.value.lower() == key:
                return tag
        raise ValueError(f"unknown strategy {text!r}")

    @property
    def slug(self) -> str:
        return {
            "Ankle": "ankle",
            "Toe": "toe",
            "ToeToStep": "toe-to-step",
            "OneStep": "one-step",
            "TwoStep": "two-step",
        }[self.value]


class StartMode(str, enum.Enum):
    INFORMED = "informed"
    RANDOM = "random"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ReferenceState:
    """Steady-state CoM position and velocity used as the control target."""

    p_star: float
    v_star: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p_star) and math.isfinite(self.v_star)):
            raise NonFiniteValue("reference state must be finite")


def _as_readonly(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or inf")
    arr.setflags(write=False)
    return arr


def check_uniform_time(time: np.ndarray) -> float:
    """Return the sample step of ``time`` or raise if it is not uniform."""
    steps = np.diff(time)
    if np.any(steps <= 0):
        raise NonUniformTimestep("time must be strictly increasing")
    dt = float(time[-1] - time[0]) / (len(time) - 1)
    if np.max(np.abs(steps - dt)) > DT_RELATIVE_TOLERANCE * dt:
        raise NonUniformTimestep(
            f"time step varies by {np.max(np.abs(steps - dt)):.3g} s around dt={dt:.6g} s"
        )
    return dt


@dataclass(frozen=True)
class Trial:
    """Timestamped 1-D CoM kinematics of one push-recovery trial.

    ``origin_offset`` records how far the position column has been shifted
    by :func:`pushid.signal.shift_origin`, so the absolute start position is
    ``position[0] + origin_offset``.
    """

    id: str
    time: np.ndarray
    position: np.ndarray
    mass: float
    velocity: Optional[np.ndarray] = None
    acceleration: Optional[np.ndarray] = None
    strategy: Optional[StrategyTag] = None
    start_mode: StartMode = StartMode.UNKNOWN
    abandoned: bool = False
    origin_offset: float = 0.0

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "time", _as_readonly(self.time, "time"))
        set_(self, "position", _as_readonly(self.position, "position"))
        n = len(self.time)
        if n < MIN_TRIAL_LENGTH:
            raise InvalidTrial(f"trial {self.id!r} has {n} samples, need >= {MIN_TRIAL_LENGTH}")
        for name in ("velocity", "acceleration"):
            value = getattr(self, name)
            if value is not None:
                set_(self, name, _as_readonly(value, name))
        for name in ("position", "velocity", "acceleration"):
            value = getattr(self, name)
            if value is not None and len(value) != n:
                raise InvalidTrial(f"{name} has length {len(value)}, time has {n}")
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise InvalidTrial(f"mass must be positive, got {self.mass}")
        if not math.isfinite(self.origin_offset):
            raise NonFiniteValue("origin_offset must be finite")
        if self.strategy is not None and not isinstance(self.strategy, StrategyTag):
            set_(self, "strategy", StrategyTag.parse(str(self.strategy)))
        if not isinstance(self.start_mode, StartMode):
            set_(self, "start_mode", StartMode(str(self.start_mode)))
        check_uniform_time(self.time)

    def __len__(self) -> int:
        return len(self.time)

    @property
    def dt(self) -> float:
        return float(self.time[-1] - self.time[0]) / (len(self.time) - 1)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    def require_kinematics(self, velocity: bool = True, acceleration: bool = True) -> None:
        if velocity and self.velocity is None:
            raise MissingKinematics(f"trial {self.id!r} has no velocity")
        if acceleration and self.acceleration is None:
            raise MissingKinematics(f"trial {self.id!r} has no acceleration")

    def slice(self, start: int, end: int) -> "Trial":
        """Consistent sub-trial covering samples ``[start, end)``."""
        cut = slice(start, end)
        return replace(
            self,
            time=self.time[cut],
            position=self.position[cut],
            velocity=None if self.velocity is None else self.velocity[cut],
            acceleration=None if self.acceleration is None else self.acceleration[cut],
        )

    def metadata(self) -> dict:
        meta = {
            "id": self.id,
            "mass_kg": self.mass,
            "start_mode": self.start_mode.value,
            "abandoned": self.abandoned,
        }
        if self.strategy is not None:
            meta["strategy"] = self.strategy.value
        if self.origin_offset != 0.0:
            meta["origin_offset_m"] = self.origin_offset
        return meta


@dataclass(frozen=True)
class TreadmillLog:
    """Treadmill belt speed over time (captured at 600 Hz on the rig)."""

    time: np.ndarray
    speed: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "time", _as_readonly(self.time, "time"))
        object.__setattr__(self, "speed", _as_readonly(self.speed, "speed"))
        if len(self.time) != len(self.speed):
            raise InvalidTrial("treadmill time and speed lengths differ")
        if len(self.time) < 2 or np.any(np.diff(self.time) <= 0):
            raise InvalidTrial("treadmill time must be strictly increasing")
        if self.speed[0] < 0:
            raise InvalidTrial("treadmill speed must start non-negative")


def reference_state(trial: Trial) -> ReferenceState:
    """Last sample of (position, velocity): the recovered steady state."""
    trial.require_kinematics(velocity=True, acceleration=False)
    return ReferenceState(float(trial.position[-1]), float(trial.velocity[-1]))


# --------------------------------------------------------------------- I/O


def _parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "y"):
        return True
    if value in ("0", "false", "no", "n", ""):
        return False
    raise MalformedCsv(f"cannot parse boolean {text!r}")


def _parse_float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError as exc:
        raise MalformedCsv(f"{where}: not a number: {cell!r}") from exc
    if not math.isfinite(value):
        raise NonFiniteValue(f"{where}: non-finite value {cell!r}")
    return value


def _read_table(text: str, source: str) -> tuple[dict, list[str], np.ndarray]:
    """Split a CSV with ``#key=value`` comment lines into (meta, header, rows)."""
    meta: dict = {}
    body: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        body.append(line)
    if not body:
        raise MalformedCsv(f"{source}: no header row")
    reader = csv.reader(io.StringIO("\n".join(body)))
    header = [h.strip() for h in next(reader)]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise MalformedCsv(
                f"{source}: row {lineno} has {len(row)} cells, header has {len(header)}"
            )
        rows.append([_parse_float(c, f"{source}: row {lineno}") for c in row])
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return meta, header, data


def parse_trial_csv(text: str, source: str = "<string>", meta: Optional[dict] = None) -> Trial:
    header_meta, header, data = _read_table(text, source)
    if header[:2] != list(TRIAL_COLUMNS[:2]):
        raise MalformedCsv(f"{source}: header must start with time_s,position_m, got {header}")
    allowed = set(TRIAL_COLUMNS)
    if not set(header) <= allowed or len(set(header)) != len(header):
        raise MalformedCsv(f"{source}: unexpected columns {header}")
    merged = {**header_meta, **(meta or {})}
    columns = {name: data[:, i] for i, name in enumerate(header)}
    if len(data) < 2:
        raise InvalidTrial(f"{source}: need at least {MIN_TRIAL_LENGTH} rows")
    check_uniform_time(columns["time_s"])
    strategy = merged.get("strategy")
    try:
        mass = float(merged.get("mass_kg", "nan"))
    except (TypeError, ValueError) as exc:
        raise MalformedCsv(f"{source}: bad mass_kg") from exc
    if not math.isfinite(mass):
        raise MalformedCsv(f"{source}: missing mass_kg metadata")
    return Trial(
        id=str(merged.get("id", Path(source).stem)),
        time=columns["time_s"],
        position=columns["position_m"],
        velocity=columns.get("velocity_mps"),
        acceleration=columns.get("acceleration_mps2"),
        mass=mass,
        strategy=StrategyTag.parse(strategy) if strategy not in (None, "") else None,
        start_mode=StartMode(str(merged.get("start_mode", "unknown")).lower()),
        abandoned=_parse_bool(merged.get("abandoned", "false")),
        origin_offset=float(merged.get("origin_offset_m", 0.0)),
    )


def load_trial(path, meta=None) -> Trial:
    """Load a trial CSV, optionally overriding metadata from a JSON sidecar."""
    path = Path(path)
    sidecar = None
    if meta is not None:
        sidecar = {k: str(v) if not isinstance(v, str) else v
                   for k, v in json.loads(Path(meta).read_text(encoding="utf-8")).items()}
    return parse_trial_csv(path.read_text(encoding="utf-8"), str(path), sidecar)


def _fmt(value: float) -> str:
    return repr(float(value))


def format_trial_csv(trial: Trial) -> str:
    lines = [f"#{key}={str(value).lower() if isinstance(value, bool) else value}"
             for key, value in trial.metadata().items()]
    columns = [trial.time, trial.position]
    names = list(TRIAL_COLUMNS[:2])
    if trial.velocity is not None:
        columns.append(trial.velocity)
        names.append(TRIAL_COLUMNS[2])
    if trial.acceleration is not None:
        columns.append(trial.acceleration)
        names.append(TRIAL_COLUMNS[3])
    lines.append(",".join(names))
    for row in zip(*columns):
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def save_trial(trial: Trial, path) -> Path:
    path = Path(path)
    path.write_text(format_trial_csv(trial), encoding="utf-8", newline="\n")
    return path


def load_treadmill(path) -> TreadmillLog:
    path = Path(path)
    _, header, data = _read_table(path.read_text(encoding="utf-8"), str(path))
    if header != list(TREADMILL_COLUMNS):
        raise MalformedCsv(f"{path}: treadmill header must be time_s,speed_mps")
    return TreadmillLog(time=data[:, 0], speed=data[:, 1])


def save_treadmill(log: TreadmillLog, path) -> Path:
    path = Path(path)
    rows = [",".join(TREADMILL_COLUMNS)]
    rows += [f"{_fmt(t)},{_fmt(s)}" for t, s in zip(log.time, log.speed)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
    return path
