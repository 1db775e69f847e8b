"""Forward simulation of a 1-D point-mass CoM under PID-family feedback.

The acceleration law is ``a = kp (p* - q) + ki E + kd (v* - v)`` with all
gains already divided by mass.  ``E`` is the dt-weighted running integral of
the position error, so a fitted integral gain (which uses a plain sum over
samples) equals ``ki * dt`` when the fit runs at the integration step.

Integration is semi-implicit Euler: velocity first, then position with the
new velocity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidSpec
from .trialdata import ReferenceState, StartMode, StrategyTag, Trial

DEFAULT_DT = 1e-3
DEFAULT_OUTPUT_DT = 0.01


@dataclass(frozen=True)
class SimState:
    q: float
    v: float
    t: float = 0.0


@dataclass(frozen=True)
class GainSet:
    """Mass-normalized gains; a zero gain switches its term off."""

    kp_over_m: float = 0.0
    ki_over_m: float = 0.0
    kd_over_m: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(g) for g in (self.kp_over_m, self.ki_over_m, self.kd_over_m)):
            raise InvalidSpec("gains must be finite")

    def as_dict(self) -> dict:
        return {"kp_over_m": self.kp_over_m, "ki_over_m": self.ki_over_m,
                "kd_over_m": self.kd_over_m}


@dataclass(frozen=True)
class SchedulePhase:
    switch_time: float
    gains: GainSet
    reference: ReferenceState


@dataclass(frozen=True)
class GainSchedule:
    phases: tuple

    def __post_init__(self) -> None:
        phases = tuple(
            p if isinstance(p, SchedulePhase) else SchedulePhase(*p) for p in self.phases
        )
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise InvalidSpec("schedule needs at least one phase")
        if phases[0].switch_time != 0:
            raise InvalidSpec("first schedule phase must start at t=0")
        times = [p.switch_time for p in phases]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidSpec("schedule switch times must be strictly increasing")

    @classmethod
    def constant(cls, gains: GainSet, reference: ReferenceState = ReferenceState(0.0, 0.0)):
        return cls((SchedulePhase(0.0, gains, reference),))

    def as_dict(self) -> list:
        return [
            {"switch_time": p.switch_time, "gains": p.gains.as_dict(),
             "reference": {"p_star": p.reference.p_star, "v_star": p.reference.v_star}}
            for p in self.phases
        ]


def acceleration(q: float, v: float, gains: GainSet, reference: ReferenceState,
                 accumulated_error: float) -> float:
    return (gains.kp_over_m * (reference.p_star - q)
            + gains.ki_over_m * accumulated_error
            + gains.kd_over_m * (reference.v_star - v))


def step(state: SimState, gains: GainSet, reference: ReferenceState,
         accumulated_error: float, dt: float) -> tuple[SimState, float]:
    """Advance one semi-implicit Euler step.

    The integral is updated with the pre-step position error before the
    acceleration is evaluated.
    """
    if not dt > 0:
        raise InvalidSpec("dt must be positive")
    accumulated_error = accumulated_error + (reference.p_star - state.q) * dt
    a = acceleration(state.q, state.v, gains, reference, accumulated_error)
    v = state.v + a * dt
    q = state.q + v * dt
    return SimState(q, v, state.t + dt), accumulated_error


def _step_count(duration: float, step: float) -> int:
    return int(math.floor(duration / step + 1e-9))


def simulate_trial(
    q0: float,
    v0: float,
    schedule: GainSchedule,
    duration: float,
    dt: float = DEFAULT_DT,
    mass: float = 70.0,
    impulses: Optional[Sequence[tuple[float, float]]] = None,
    output_dt: float = DEFAULT_OUTPUT_DT,
    trial_id: str = "sim",
    strategy: Optional[StrategyTag] = None,
    start_mode: StartMode = StartMode.UNKNOWN,
) -> Trial:
    """Integrate at ``dt`` and record (q, v, a) every ``output_dt``.

    Each recorded acceleration is the command evaluated at the recorded
    state, so the samples satisfy the control law exactly.  Impulses add
    their velocity change at the integration step nearest their time,
    before that step's state is recorded.  Phase switches happen at the
    integration step nearest each switch time.
    """
    if not (dt > 0 and output_dt > 0 and duration > 0):
        raise InvalidSpec("dt, output_dt and duration must be positive")
    ratio = output_dt / dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * ratio:
        raise InvalidSpec("output_dt must be an integer multiple of dt")
    n_out = _step_count(duration, output_dt) + 1
    if n_out < 3:
        raise InvalidSpec("duration too short for three output samples")
    n_steps = (n_out - 1) * stride + 1

    kicks: dict[int, float] = {}
    for t_imp, dv in impulses or ():
        k = int(round(t_imp / dt))
        kicks[k] = kicks.get(k, 0.0) + float(dv)
    switches = [int(round(p.switch_time / dt)) for p in schedule.phases]

    events = sorted(set(kicks) | set(switches[1:]))
    events.append(n_steps)  # sentinel
    q_out = np.empty(n_out)
    v_out = np.empty(n_out)
    a_out = np.empty(n_out)

    q, v, err = float(q0), float(v0), 0.0
    phase_idx = -1
    kp = ki = kd = p_ref = v_ref = 0.0
    ev = 0
    next_event = events[0]
    next_record = 0
    k = 0
    for n in range(n_steps):
        if n == 0 or n == next_event:
            while phase_idx + 1 < len(switches) and n >= switches[phase_idx + 1]:
                phase_idx += 1
                phase = schedule.phases[phase_idx]
                kp, ki, kd = phase.gains.kp_over_m, phase.gains.ki_over_m, phase.gains.kd_over_m
                p_ref, v_ref = phase.reference.p_star, phase.reference.v_star
            v += kicks.get(n, 0.0)
            while events[ev] <= n:
                ev += 1
            next_event = events[ev]
        e = p_ref - q
        err += e * dt
        a = kp * e + ki * err + kd * (v_ref - v)
        if n == next_record:
            q_out[k] = q
            v_out[k] = v
            a_out[k] = a
            k += 1
            next_record += stride
        v += a * dt
        q += v * dt

    return Trial(
        id=trial_id,
        time=np.arange(n_out) * output_dt,
        position=q_out,
        velocity=v_out,
        acceleration=a_out,
        mass=mass,
        strategy=strategy,
        start_mode=start_mode,
    )


# ------------------------------------------------------------------ archetypes


@dataclass(frozen=True)
class ArchetypeParams:
    """Knobs for :func:`synth_archetype`.

    ``valley_depth`` is the acceleration depth (m/s²) that stepping valleys
    are built to undershoot and non-stepping phases are kept above.
    ``push_scale`` multiplies every push velocity change; the defaults are
    illustrative choices, not measured push magnitudes.
    """

    valley_depth: float = 1.0
    duration: float = 5.0
    dt: float = DEFAULT_DT
    output_dt: float = DEFAULT_OUTPUT_DT
    mass_range: tuple = (55.0, 90.0)
    push_scale: float = 1.0


@dataclass(frozen=True)
class Archetype:
    """A synthetic trial plus the construction ground truth."""

    tag: StrategyTag
    trial: Trial
    breakpoints: tuple
    phase_labels: tuple
    schedule: GainSchedule
    impulses: tuple

    def ground_truth(self) -> dict:
        return {
            "trial_id": self.trial.id,
            "strategy": self.tag.value,
            "breakpoints": list(self.breakpoints),
            "labels": list(self.phase_labels),
            "schedule": self.schedule.as_dict(),
            "impulses": [{"time": t, "dv": dv} for t, dv in self.impulses],
        }


def _overdamped(rng, kp_low: float, kp_high: float) -> GainSet:
    kp = rng.uniform(kp_low, kp_high)
    return GainSet(kp, 0.0, 2.0 * math.sqrt(kp) * rng.uniform(1.1, 1.3))


class _Builder:
    """Grows a piecewise schedule one milestone at a time."""

    def __init__(self, q0: float, params: ArchetypeParams, mass: float):
        self.q0 = q0
        self.params = params
        self.mass = mass
        self.phases: list[SchedulePhase] = []
        self.impulses: list[tuple[float, float]] = []

    def time_of(self, k: int) -> float:
        return k * self.params.output_dt

    def add_phase(self, k: int, gains: GainSet, reference: ReferenceState) -> None:
        self.phases.append(SchedulePhase(self.time_of(k), gains, reference))

    def run(self, **kwargs) -> Trial:
        p = self.params
        return simulate_trial(self.q0, 0.0, GainSchedule(tuple(self.phases)), p.duration,
                              dt=p.dt, mass=self.mass, impulses=self.impulses,
                              output_dt=p.output_dt, **kwargs)

    @staticmethod
    def first(mask: np.ndarray, start: int) -> int:
        hits = np.flatnonzero(mask[start:])
        if hits.size == 0:
            raise RuntimeError("archetype milestone not reached; lengthen the duration")
        return start + int(hits[0])


def _toe_prefix(b: _Builder, rng, depth: float, scale: float) -> tuple[int, int]:
    """Push, rise onto the toes, then drop back to the sole."""
    ref = ReferenceState(0.0, 0.0)
    b.impulses.append((0.0, rng.uniform(0.13, 0.18) * scale))
    b.add_phase(0, GainSet(rng.uniform(8.0, 10.5), 0.0, rng.uniform(2.5, 3.2)), ref)
    probe = b.run()
    k1 = b.first(probe.velocity <= 0, 1)
    # stiff, heavily damped heel drop: pulls acceleration to ~-0.8*depth, then snaps back to 0
    kp2 = rng.uniform(0.7, 0.85) * depth / probe.position[k1]
    b.add_phase(k1, GainSet(kp2, 0.0, 2.0 * math.sqrt(kp2) * rng.uniform(1.2, 1.5)), ref)
    probe = b.run()
    k2 = b.first(probe.acceleration >= 0, k1)
    return k1, k2


def _add_step(b: _Builder, rng, k_start: int, gains: GainSet, reference: ReferenceState,
              depth: float) -> int:
    """Step phase from ``k_start`` with a push that drives acceleration below ``-depth``."""
    b.add_phase(k_start, gains, reference)
    k_push = k_start + int(rng.integers(5, 15))
    probe = b.run()
    dv = (probe.acceleration[k_push] + depth * rng.uniform(1.3, 1.8)) / gains.kd_over_m
    b.impulses.append((b.time_of(k_push), dv))
    probe = b.run()
    low = k_push + int(np.argmin(probe.acceleration[k_push:k_push + 50]))
    return b.first(probe.acceleration >= 0, low)


def synth_archetype(tag: StrategyTag, seed: int = 0,
                    params: ArchetypeParams = ArchetypeParams()) -> Archetype:
    """Deterministic synthetic trial with the velocity-acceleration signature of ``tag``."""
    tag = StrategyTag.parse(tag) if isinstance(tag, str) else tag
    rng = np.random.default_rng([seed, list(StrategyTag).index(tag)])
    mass = float(rng.uniform(*params.mass_range))
    depth = params.valley_depth
    scale = params.push_scale
    origin = ReferenceState(0.0, 0.0)

    if tag is StrategyTag.ANKLE:
        b = _Builder(rng.uniform(-0.025, -0.005), params, mass)
        b.impulses.append((0.0, rng.uniform(0.10, 0.15) * scale))
        b.add_phase(0, GainSet(rng.uniform(7.5, 10.0), 0.0, rng.uniform(2.8, 3.8)), origin)
        k1 = b.first(b.run().acceleration >= 0, 1)
        b.add_phase(k1, _overdamped(rng, 2.5, 4.0), origin)
        bps = (k1,)
    elif tag is StrategyTag.TOE:
        b = _Builder(rng.uniform(0.01, 0.03), params, mass)
        k1, k2 = _toe_prefix(b, rng, depth, scale)
        b.add_phase(k2, _overdamped(rng, 3.5, 5.0), origin)
        bps = (k1, k2)
    elif tag in (StrategyTag.ONE_STEP, StrategyTag.TWO_STEP):
        p0 = rng.uniform(0.04, 0.09)
        b = _Builder(p0, params, mass)
        ref = ReferenceState(p0 + rng.uniform(0.0, 0.05), 0.0)
        g1 = GainSet(rng.uniform(11.0, 16.0), 0.0, rng.uniform(4.5, 6.0))
        dv = (g1.kp_over_m * (ref.p_star - p0) + depth * rng.uniform(1.6, 2.6)) / g1.kd_over_m
        b.impulses.append((0.0, dv * scale))
        b.add_phase(0, g1, ref)
        k1 = b.first(b.run().acceleration >= 0, 1)
        bps = (k1,)
        if tag is StrategyTag.TWO_STEP:
            g2 = GainSet(g1.kp_over_m * rng.uniform(0.8, 1.1), 0.0,
                         g1.kd_over_m * rng.uniform(0.8, 1.1))
            bps = (k1, _add_step(b, rng, k1, g2, ref, depth))
        b.add_phase(bps[-1], _overdamped(rng, 6.0, 9.0), ref)
    else:  # ToeToStep
        b = _Builder(rng.uniform(0.01, 0.03), params, mass)
        k1, k2 = _toe_prefix(b, rng, depth, scale)
        g3 = GainSet(rng.uniform(11.0, 16.0), 0.0, rng.uniform(4.5, 6.0))
        k3 = _add_step(b, rng, k2, g3, origin, depth)
        b.add_phase(k3, _overdamped(rng, 6.0, 9.0), origin)
        bps = (k1, k2, k3)

    labels = _ARCHETYPE_LABELS[tag]
    trial = b.run(trial_id=f"{tag.slug}-{seed:03d}", strategy=tag)
    return Archetype(tag, trial, bps, labels, GainSchedule(tuple(b.phases)), tuple(b.impulses))


_ARCHETYPE_LABELS = {
    StrategyTag.ANKLE: ("lean_cross", "lean_recover"),
    StrategyTag.TOE: ("lift_to_tiptoe", "drop_to_sole", "lean_recover"),
    StrategyTag.ONE_STEP: ("step", "lean_after_step"),
    StrategyTag.TWO_STEP: ("step", "second_step", "lean_after_step"),
    StrategyTag.TOE_TO_STEP: ("lift_to_tiptoe", "drop_to_sole", "step", "lean_after_step"),
}


# ------------------------------------------------------------------ generic PD trials


@dataclass(frozen=True)
class PdTrialParams:
    """Ranges for :func:`synth_pd_trial`.

    ``noise_std`` is the standard deviation of Gaussian measurement noise
    added to the recorded (position, velocity, acceleration).
    """

    kp_range: tuple = (2.0, 15.0)
    kd_range: tuple = (1.0, 6.0)
    q0_range: tuple = (0.05, 0.3)
    v0_range: tuple = (0.2, 0.6)
    duration: float = 5.0
    dt: float = DEFAULT_DT
    output_dt: float = DEFAULT_OUTPUT_DT
    mass_range: tuple = (55.0, 90.0)
    noise_std: tuple = (0.0, 0.0, 0.0)


def synth_pd_trial(seed: int, params: PdTrialParams = PdTrialParams(),
                   trial_id: Optional[str] = None) -> tuple[Trial, GainSet]:
    """Single-phase PD recovery towards the origin from a push-like state."""
    rng = np.random.default_rng([seed, 99])
    gains = GainSet(rng.uniform(*params.kp_range), 0.0, rng.uniform(*params.kd_range))
    q0, v0 = rng.uniform(*params.q0_range), rng.uniform(*params.v0_range)
    mass = float(rng.uniform(*params.mass_range))
    trial = simulate_trial(q0, v0, GainSchedule.constant(gains), params.duration, dt=params.dt,
                           mass=mass, output_dt=params.output_dt,
                           trial_id=trial_id or f"pd-{seed:03d}")
    if any(params.noise_std):
        sp, sv, sa = params.noise_std
        n = len(trial)
        trial = Trial(trial.id, trial.time, trial.position + sp * rng.standard_normal(n),
                      trial.mass, trial.velocity + sv * rng.standard_normal(n),
                      trial.acceleration + sa * rng.standard_normal(n))
    return trial, gains
