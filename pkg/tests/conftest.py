import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kenergy.geometry import Manifold, build_grid, default_grid
from kenergy.oracles import FiniteDifferenceWarning

settings.register_profile(
    "kenergy", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("kenergy")


@pytest.fixture(scope="session")
def cp1():
    return default_grid(Manifold("CP1"))


@pytest.fixture(scope="session")
def cp1_coarse():
    return build_grid(Manifold("CP1"), (16, 16))


@pytest.fixture(scope="session")
def cp2_radial():
    return build_grid(Manifold("CP2"), (32,), "radial")


@pytest.fixture(scope="session")
def cp2_full():
    return default_grid(Manifold("CP2"))


@pytest.fixture(scope="session")
def t2():
    return default_grid(Manifold("T2"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_fd_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FiniteDifferenceWarning)
        yield


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion."""
    return request.config.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
