import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pairsight.core import Calibration, CameraGeometry

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_geom():
    return CameraGeometry(width=32, height=16, pitch=10.0, time_quantum=1.0)


@pytest.fixture
def small_cal(small_geom):
    return Calibration.for_geometry(small_geom, magnification=2.0, f_eff=50.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
