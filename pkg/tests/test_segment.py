import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pushid.errors import NoMilestone, OrderViolation, UnsupportedStrategy
from pushid.segment import (ClassifierParams, Segmentation, classify_strategy, crossings,
                            segment, segment_ankle, segment_one_step, segment_toe,
                            trajectory_features)
from pushid.simulate import synth_archetype
from pushid.trialdata import StrategyTag, Trial

SEGMENTABLE = (StrategyTag.ANKLE, StrategyTag.TOE, StrategyTag.ONE_STEP)


def kin_trial(v, a, dt=0.01, t0=0.0, mass=70.0, strategy=None):
    v, a = np.asarray(v, float), np.asarray(a, float)
    return Trial("k", t0 + np.arange(len(a)) * dt, np.zeros(len(a)), mass, v, a, strategy)


def prepend_rest(trial, k):
    pad = np.zeros(k)
    return Trial(trial.id, np.arange(len(trial) + k) * trial.dt,
                 np.concatenate([np.full(k, trial.position[0]), trial.position]), trial.mass,
                 np.concatenate([pad, trial.velocity]), np.concatenate([pad, trial.acceleration]),
                 trial.strategy)


def test_ankle_sine():
    t = np.linspace(0.0, 2.0, 201)
    seg = segment_ankle(kin_trial(np.zeros(201), -np.sin(np.pi * t)))
    assert seg.breakpoints == (100,)
    assert seg.phase_labels == ("lean_cross", "lean_recover")


def test_ankle_no_milestone():
    with pytest.raises(NoMilestone):
        segment_ankle(kin_trial(np.zeros(50), np.linspace(0.1, 2.0, 50)))


def test_toe_analytic():
    t = np.arange(101) * 0.01
    seg = segment_toe(kin_trial(np.cos(2 * np.pi * t), -np.sin(2 * np.pi * t)))
    assert seg.breakpoints == (25, 50)
    assert len(seg.phase_labels) == 3


def test_toe_errors():
    t = np.arange(101) * 0.01
    with pytest.raises(NoMilestone):
        segment_toe(kin_trial(np.ones(101), -np.sin(2 * np.pi * t)))
    with pytest.raises(NoMilestone):
        segment_toe(kin_trial(np.cos(2 * np.pi * t[:60]), np.ones(60)))


def test_one_step_gaussian_valley():
    t = np.arange(101) * 0.01
    a = -np.exp(-(((t - 0.3) / 0.1) ** 2)) + 0.2
    root = 0.3 + 0.1 * math.sqrt(-math.log(0.2))
    seg = segment_one_step(kin_trial(np.zeros(101), a))
    assert seg.breakpoints == (int(round(root / 0.01)),)


def test_one_step_no_milestone():
    with pytest.raises(NoMilestone):
        segment_one_step(kin_trial(np.zeros(40), np.linspace(0.0, 1.0, 40)))


def test_dispatch():
    trial = synth_archetype(StrategyTag.ANKLE, 0).trial
    assert segment(trial) == segment_ankle(trial)
    assert len(segment(synth_archetype(StrategyTag.TOE, 0).trial).phase_labels) == 3
    for tag in (StrategyTag.TWO_STEP, StrategyTag.TOE_TO_STEP):
        with pytest.raises(UnsupportedStrategy):
            segment(synth_archetype(tag, 0).trial)


def test_segmentation_invariants():
    with pytest.raises(ValueError):
        Segmentation((5, 5), ("a", "b", "c"))
    with pytest.raises(ValueError):
        Segmentation((0,), ("a", "b"))
    with pytest.raises(ValueError):
        Segmentation((3,), ("a",))
    with pytest.raises(ValueError):
        Segmentation((10,), ("a", "b"), n_samples=10)
    assert Segmentation((3, 7), ("a", "b", "c")).bounds(10) == [(0, 3), (3, 7), (7, 10)]


def test_hysteresis_suppresses_chatter():
    x = np.array([-1.0, -1e-4, 2e-4, -3e-4, 5e-4, 1.0, 1.0])
    assert len(crossings(x)) == 1


@pytest.mark.parametrize("tag", SEGMENTABLE)
@pytest.mark.parametrize("seed", range(20))
def test_archetype_breakpoints_match_ground_truth(tag, seed):
    arch = synth_archetype(tag, seed)
    seg = segment(arch.trial)
    assert seg.phase_labels == arch.phase_labels
    np.testing.assert_allclose(seg.breakpoints, arch.breakpoints, atol=2)


@pytest.mark.parametrize("tag", SEGMENTABLE)
@given(seed=st.integers(0, 50), noise_seed=st.integers(0, 2**31 - 1))
def test_milestones_stable_under_small_noise(tag, seed, noise_seed):
    trial = synth_archetype(tag, seed).trial
    rng = np.random.default_rng(noise_seed)
    noisy = Trial(trial.id, trial.time, trial.position, trial.mass, trial.velocity,
                  trial.acceleration + rng.uniform(-1e-4, 1e-4, len(trial)), trial.strategy)
    np.testing.assert_allclose(segment(noisy).breakpoints, segment(trial).breakpoints, atol=3)


@pytest.mark.parametrize("tag", SEGMENTABLE)
@given(seed=st.integers(0, 50), k=st.integers(1, 40))
def test_time_shift_equivariance(tag, seed, k):
    trial = synth_archetype(tag, seed).trial
    base = segment(trial).breakpoints
    assert segment(prepend_rest(trial, k)).breakpoints == tuple(b + k for b in base)


@pytest.mark.parametrize("tag", list(StrategyTag))
@pytest.mark.parametrize("seed", range(20))
def test_classifier_recovers_archetype(tag, seed):
    assert classify_strategy(synth_archetype(tag, seed).trial) is tag


@pytest.mark.parametrize("tag", list(StrategyTag))
def test_classifier_invariances(tag):
    trial = synth_archetype(tag, 1).trial
    shifted = Trial(trial.id, trial.time + 12.34, trial.position, trial.mass * 1.7,
                    trial.velocity, trial.acceleration)
    assert classify_strategy(shifted) is classify_strategy(trial)


def test_classifier_degenerate_and_constructed():
    assert classify_strategy(kin_trial(np.zeros(100), np.zeros(100))) is StrategyTag.ANKLE
    t = np.arange(300) * 0.01
    valley = lambda c: -2.0 * np.exp(-(((t - c) / 0.08) ** 2))  # noqa: E731
    a = valley(0.8) + valley(2.0)
    assert trajectory_features(kin_trial(np.zeros(300), a))["n_valleys"] == 2
    assert classify_strategy(kin_trial(np.zeros(300), a)) is StrategyTag.TWO_STEP


def test_classifier_params_are_used():
    trial = synth_archetype(StrategyTag.ONE_STEP, 0).trial
    deep = ClassifierParams(valley_depth=1e3)
    assert classify_strategy(trial, deep) is not StrategyTag.ONE_STEP
