import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pushid.errors import (InvalidTrial, MalformedCsv, MissingKinematics, NonFiniteValue,
                           NonUniformTimestep)
from pushid.simulate import GainSchedule, GainSet, simulate_trial
from pushid.trialdata import (ReferenceState, StartMode, StrategyTag, TreadmillLog, Trial,
                              format_trial_csv, load_trial, load_treadmill, parse_trial_csv,
                              reference_state, save_trial, save_treadmill)


def test_three_row_csv(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0\n0.02,0\n")
    trial = load_trial(path)
    assert len(trial) == 3
    assert trial.dt == pytest.approx(0.01, rel=1e-12)
    assert np.all(trial.position == 0)
    assert trial.velocity is None and trial.acceleration is None
    assert trial.id == "a"


def test_nan_cell_rejected():
    text = "#mass_kg=70\ntime_s,position_m\n0,0\n0.01,nan\n0.02,0\n"
    with pytest.raises(NonFiniteValue):
        parse_trial_csv(text)


def test_301_rows_at_100hz():
    rows = "\n".join(f"{i / 100!r},{0.001 * i!r}" for i in range(301))
    trial = parse_trial_csv(f"#mass_kg=65\ntime_s,position_m\n{rows}\n")
    assert len(trial) == 301
    assert trial.dt == pytest.approx(0.01, rel=1e-12)
    assert trial.sample_rate == pytest.approx(100.0)


@pytest.mark.parametrize("text, error", [
    ("#mass_kg=70\ntime_s,position_m\n0,0\n0.01\n0.02,0\n", MalformedCsv),
    ("#mass_kg=70\ntime,position\n0,0\n0.01,0\n0.02,0\n", MalformedCsv),
    ("#mass_kg=70\ntime_s,position_m\n0,0\n0.01,x\n0.02,0\n", MalformedCsv),
    ("time_s,position_m\n0,0\n0.01,0\n0.02,0\n", MalformedCsv),
    ("#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0\n0.03,0\n", NonUniformTimestep),
    ("#mass_kg=70\ntime_s,position_m\n0,0\n0.01,inf\n0.02,0\n", NonFiniteValue),
    ("#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0\n", InvalidTrial),
])
def test_bad_csv(text, error):
    with pytest.raises(error):
        parse_trial_csv(text)


def test_metadata_from_header_and_sidecar(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("#id=s01_t07\n#mass_kg=70\n#strategy=toe-to-step\n#start_mode=informed\n"
                    "#abandoned=true\ntime_s,position_m,velocity_mps\n0,0,1\n0.01,0.01,1\n0.02,0.02,1\n")
    trial = load_trial(path)
    assert trial.id == "s01_t07"
    assert trial.strategy is StrategyTag.TOE_TO_STEP
    assert trial.start_mode is StartMode.INFORMED
    assert trial.abandoned
    sidecar = tmp_path / "t.meta.json"
    sidecar.write_text(json.dumps({"mass_kg": 81.5, "abandoned": False, "strategy": "OneStep"}))
    trial = load_trial(path, sidecar)
    assert trial.mass == 81.5 and not trial.abandoned and trial.strategy is StrategyTag.ONE_STEP


def test_trial_invariants(trial_factory):
    with pytest.raises(InvalidTrial):
        trial_factory([0.0, 1.0])
    with pytest.raises(InvalidTrial):
        trial_factory([0.0, 1.0, 2.0], mass=0.0)
    with pytest.raises(InvalidTrial):
        trial_factory([0.0, 1.0, 2.0], velocity=[1.0, 1.0])
    with pytest.raises(NonUniformTimestep):
        Trial("x", [0.0, 0.01, 0.0200001], [0, 0, 0], 70.0)
    trial = trial_factory([0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        trial.position[0] = 5.0  # arrays are read-only


def test_timestep_tolerance_is_relative():
    dt = 0.01
    Trial("x", np.array([0, dt, 2 * dt + 5e-12]), [0, 0, 0], 70.0)  # within 1e-9 relative
    with pytest.raises(NonUniformTimestep):
        Trial("x", np.array([0, dt, 2 * dt + 5e-10]), [0, 0, 0], 70.0)


def test_reference_state_examples(trial_factory):
    trial = trial_factory([0.0, 0.005, 0.012], velocity=[0.1, 0.01, 0.003])
    assert reference_state(trial) == ReferenceState(0.012, 0.003)
    zero = trial_factory(np.zeros(5), velocity=np.zeros(5))
    assert reference_state(zero) == ReferenceState(0.0, 0.0)
    with pytest.raises(MissingKinematics):
        reference_state(trial_factory([0.0, 0.0, 0.0]))


def test_reference_state_of_converged_simulation():
    sim = simulate_trial(0.1, 0.3, GainSchedule.constant(GainSet(8.0, 0.0, 4.0),
                                                         ReferenceState(0.05, 0.0)), 10.0)
    ref = reference_state(sim)
    assert abs(ref.p_star - 0.05) < 1e-3 and abs(ref.v_star) < 1e-3


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, finite), min_size=3, max_size=40),
       st.sampled_from([0.01, 1 / 600, 0.001]))
def test_round_trip_bit_exact(rows, dt):
    p, v, a = (np.array(c) for c in zip(*rows))
    trial = Trial("rt", np.arange(len(p)) * dt, p, 72.25, v, a, StrategyTag.TOE,
                  StartMode.RANDOM, origin_offset=0.125)
    back = parse_trial_csv(format_trial_csv(trial))
    for name in ("time", "position", "velocity", "acceleration"):
        np.testing.assert_array_equal(getattr(back, name), getattr(trial, name))
    assert back.metadata() == trial.metadata()


def test_save_load_files(tmp_path, trial_factory):
    trial = trial_factory(np.linspace(0, 1, 11) ** 2, velocity=np.ones(11), strategy="Ankle")
    back = load_trial(save_trial(trial, tmp_path / "x.csv"))
    np.testing.assert_array_equal(back.position, trial.position)
    assert back.acceleration is None
    log = TreadmillLog(np.arange(4) / 600, [0.6, 0.3, 0.0, 0.0])
    back_log = load_treadmill(save_treadmill(log, tmp_path / "x.treadmill.csv"))
    np.testing.assert_array_equal(back_log.speed, log.speed)


@given(st.lists(finite, min_size=3, max_size=30))
def test_reference_is_last_sample(values):
    v = np.array(values)
    trial = Trial("r", np.arange(len(v)) * 0.01, v, 70.0, velocity=v[::-1])
    ref = reference_state(trial)
    assert ref.p_star == v[-1] and ref.v_star == v[0]


def test_strategy_parse():
    assert StrategyTag.parse("one-step") is StrategyTag.ONE_STEP
    assert StrategyTag.parse("TwoStep") is StrategyTag.TWO_STEP
    assert StrategyTag.TOE_TO_STEP.slug == "toe-to-step"
    with pytest.raises(ValueError):
        StrategyTag.parse("hop")
