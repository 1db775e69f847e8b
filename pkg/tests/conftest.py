import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pushid.trialdata import Trial

settings.register_profile("pushid", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pushid")


def make_trial(position, dt=0.01, velocity=None, acceleration=None, **kwargs):
    position = np.asarray(position, dtype=float)
    kwargs.setdefault("mass", 70.0)
    kwargs.setdefault("id", "t")
    return Trial(time=np.arange(len(position)) * dt, position=position,
                 velocity=velocity, acceleration=acceleration, **kwargs)


@pytest.fixture
def trial_factory():
    return make_trial


# ---------------------------------------------------------------- acceptance verdicts

_VERDICTS: dict = {}


@pytest.fixture
def verdict():
    """``verdict(criterion, ok, detail, part=None)`` records, prints and asserts one check."""
    def record(criterion, ok, detail, part=None):
        name = f"{criterion}{part}" if part else str(criterion)
        _VERDICTS.setdefault(int(criterion), []).append((name, bool(ok), detail))
        print(f"criterion {name}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, f"criterion {name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_VERDICTS):
        parts = _VERDICTS[criterion]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name} {'ok' if good else 'FAILED'}: {text}"
                           for name, good, text in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  ({detail})")
