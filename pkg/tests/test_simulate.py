import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pushid.errors import InvalidSpec
from pushid.fitlaw import ControlLawSpec, fit_segments
from pushid.segment import Segmentation, classify_strategy
from pushid.simulate import (GainSchedule, GainSet, SchedulePhase, SimState, simulate_trial,
                             step, synth_archetype, synth_pd_trial)
from pushid.stats import in_stable_region
from pushid.trialdata import ReferenceState, StrategyTag

ORIGIN = ReferenceState(0.0, 0.0)


def critically_damped(dt):
    trial = simulate_trial(1.0, 0.0, GainSchedule.constant(GainSet(1.0, 0.0, 2.0)), 1.0, dt=dt)
    return trial.position[100]


def test_pure_drift():
    state, err = SimState(0.0, 1.0), 0.0
    for _ in range(250):
        state, err = step(state, GainSet(), ORIGIN, err, 0.004)
    assert state.q == pytest.approx(1.0, abs=1e-12)
    assert state.v == 1.0


def test_steady_state_is_fixed():
    ref = ReferenceState(0.2, 0.0)
    state, err = step(SimState(0.2, 0.0), GainSet(9.0, 1.0, 3.0), ref, 0.0, 1e-3)
    assert (state.q, state.v, err) == (0.2, 0.0, 0.0)


def test_step_rejects_bad_dt():
    with pytest.raises(InvalidSpec):
        step(SimState(0.0, 0.0), GainSet(), ORIGIN, 0.0, 0.0)


def test_critically_damped_closed_form():
    assert critically_damped(1e-3) == pytest.approx(2 * math.exp(-1), abs=1e-3)


def test_dt_refinement_order():
    exact = 2 * math.exp(-1)
    errors = [abs(critically_damped(dt) - exact) for dt in (1e-3, 5e-4, 2.5e-4)]
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert min(orders) >= 0.9


def test_integral_is_dt_weighted_and_includes_current_step():
    state, err = step(SimState(0.0, 0.0), GainSet(0.0, 1.0, 0.0), ReferenceState(1.0, 0.0), 0.0, 0.1)
    assert err == pytest.approx(0.1)
    assert state.v == pytest.approx(0.1 * 0.1)


def test_rest_at_reference_stays_zero():
    trial = simulate_trial(0.0, 0.0, GainSchedule.constant(GainSet(8.0, 0.5, 3.0)), 2.0)
    for x in (trial.position, trial.velocity, trial.acceleration):
        np.testing.assert_array_equal(x, 0.0)


def test_overdamped_decay():
    trial = simulate_trial(0.05, 0.4, GainSchedule.constant(GainSet(4.0, 0.0, 5.0)), 12.0)
    q = np.abs(trial.position)
    peak = int(np.argmax(q))
    assert np.all(np.diff(q[peak:]) <= 0)
    assert abs(trial.velocity[-1]) < 1e-4


@given(st.floats(1.0, 20.0), st.floats(0.5, 8.0), st.floats(-0.3, 0.3), st.floats(-1.0, 1.0))
def test_energy_non_increasing(kp, kd, q0, v0):
    dt = 1e-3
    gains = GainSet(kp, 0.0, kd)
    state, err = SimState(q0, v0), 0.0
    energy = 0.5 * v0 ** 2 + 0.5 * kp * q0 ** 2
    for _ in range(2000):
        state, err = step(state, gains, ORIGIN, err, dt)
        new = 0.5 * state.v ** 2 + 0.5 * kp * state.q ** 2
        assert new <= energy + 1e-9 * dt
        energy = new


@given(st.floats(2.0, 20.0), st.floats(2.0, 8.0), st.floats(-0.3, 0.3), st.floats(-1.0, 1.0))
def test_convergence_after_twenty_time_constants(kp, kd, q0, v0):
    roots = np.roots([1.0, kd, kp])
    tau = 1.0 / float(np.min(np.abs(roots.real)))
    ref = ReferenceState(0.1, 0.0)
    trial = simulate_trial(q0, v0, GainSchedule.constant(GainSet(kp, 0.0, kd), ref), 20 * tau)
    assert abs(trial.position[-1] - 0.1) < 1e-4
    assert abs(trial.velocity[-1]) < 1e-4


def test_recorded_acceleration_satisfies_law():
    ref = ReferenceState(0.03, 0.0)
    trial = simulate_trial(0.1, 0.2, GainSchedule.constant(GainSet(6.0, 0.0, 2.5), ref), 3.0)
    law = 6.0 * (0.03 - trial.position) + 2.5 * (0.0 - trial.velocity)
    np.testing.assert_allclose(trial.acceleration, law, atol=1e-12)


def test_impulse_at_start_sets_initial_velocity():
    trial = simulate_trial(0.0, 0.0, GainSchedule.constant(GainSet(5.0, 0.0, 2.0)), 1.0,
                           impulses=[(0.0, 0.35)])
    assert trial.velocity[0] == 0.35


def test_schedule_validation():
    g = GainSet(1.0, 0.0, 1.0)
    with pytest.raises(InvalidSpec):
        GainSchedule(())
    with pytest.raises(InvalidSpec):
        GainSchedule(((0.5, g, ORIGIN),))
    with pytest.raises(InvalidSpec):
        GainSchedule(((0.0, g, ORIGIN), (0.0, g, ORIGIN)))
    with pytest.raises(InvalidSpec):
        GainSet(float("nan"))
    with pytest.raises(InvalidSpec):
        simulate_trial(0.0, 0.0, GainSchedule.constant(g), 1.0, dt=0.003)


def test_two_phase_schedule_refit():
    g1, g2 = GainSet(8.86, 0.0, 3.29), GainSet(3.46, 0.0, 1.58)
    probe = simulate_trial(0.0, 0.3, GainSchedule.constant(g1), 30.0)
    k = 1 + int(np.flatnonzero(probe.acceleration[1:] >= 0)[0])
    schedule = GainSchedule((SchedulePhase(0.0, g1, ORIGIN), SchedulePhase(k * 0.01, g2, ORIGIN)))
    trial = simulate_trial(0.0, 0.3, schedule, 30.0)
    fit = fit_segments(trial, Segmentation((k,), ("a", "b")), ControlLawSpec.parse("PD", lam=0.0))
    for phase, g in zip(fit.phases, (g1, g2)):
        assert phase.gains["kp"] == pytest.approx(g.kp_over_m, rel=0.01)
        assert phase.gains["kd"] == pytest.approx(g.kd_over_m, rel=0.01)


@pytest.mark.parametrize("tag", list(StrategyTag))
def test_archetypes_are_deterministic(tag):
    a, b = synth_archetype(tag, 3), synth_archetype(tag, 3)
    for name in ("position", "velocity", "acceleration"):
        np.testing.assert_array_equal(getattr(a.trial, name), getattr(b.trial, name))
    assert a.ground_truth() == b.ground_truth()
    assert a.trial.strategy is tag
    assert len(a.phase_labels) == len(a.breakpoints) + 1


@pytest.mark.parametrize("seed", range(10))
def test_archetype_signatures(seed):
    ankle = synth_archetype(StrategyTag.ANKLE, seed).trial.acceleration
    signs = np.sign(ankle[np.abs(ankle) > 1e-3])
    assert signs[0] < 0 and np.count_nonzero(np.diff(signs)) == 1

    one = synth_archetype(StrategyTag.ONE_STEP, seed).trial.acceleration
    low = int(np.argmin(one))
    assert np.any(one[low:] >= 0)

    two = synth_archetype(StrategyTag.TWO_STEP, seed).trial.acceleration
    below = np.concatenate([[False], two < -1.0, [False]])
    assert np.count_nonzero(np.diff(below.astype(int)) == 1) == 2


@pytest.mark.parametrize("seed", range(10))
def test_archetype_initial_states_match_stable_band(seed):
    ankle = synth_archetype(StrategyTag.ANKLE, seed).trial
    assert in_stable_region(ankle.position[0], ankle.velocity[0])
    for tag in (StrategyTag.ONE_STEP, StrategyTag.TWO_STEP):
        trial = synth_archetype(tag, seed).trial
        assert not in_stable_region(trial.position[0], trial.velocity[0])


def test_pd_trial_generator():
    trial, gains = synth_pd_trial(4)
    again, _ = synth_pd_trial(4)
    np.testing.assert_array_equal(trial.position, again.position)
    law = gains.kp_over_m * -trial.position + gains.kd_over_m * -trial.velocity
    np.testing.assert_allclose(trial.acceleration, law, atol=1e-12)
    assert trial.id == "pd-004"
