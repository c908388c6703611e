import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gistnuts.model import funnel, std_normal

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def normal1():
    return std_normal(1)


@pytest.fixture(scope="session")
def normal3():
    return std_normal(3)


@pytest.fixture(scope="session")
def funnel10():
    return funnel(10)


@pytest.fixture(scope="session")
def funnel2():
    return funnel(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
