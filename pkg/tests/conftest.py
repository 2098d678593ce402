import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sigma2flow.sphere_geometry import ConformalFactor, Grid

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid256():
    return Grid(256)


@pytest.fixture(scope="session")
def round256(grid256):
    return ConformalFactor.constant(grid256)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
