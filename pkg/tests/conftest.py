import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from resonant_wave.bifurcation import continue_branch, find_critical_point  # noqa: E402
from resonant_wave.nash_moser import NashMoserSchedule  # noqa: E402
from resonant_wave.nonlinearity import CoeffProfile, Nonlinearity  # noqa: E402
from resonant_wave.q2_solver import Q2Config  # noqa: E402
from resonant_wave.spectral_field import Field  # noqa: E402

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CUBIC_L, CUBIC_J = 32, 48
CUBIC_DELTAS = tuple(float(d) for d in np.geomspace(0.01, 0.1, 7))
NONODD_DELTAS = (1e-4, 3e-4, 1e-3)


def random_field(rng, L, J, scale=1.0, decay=0.5):
    l = np.arange(L + 1)[:, None]
    j = np.arange(1, J + 1)[None, :]
    c = (rng.standard_normal((L + 1, J)) + 1j * rng.standard_normal((L + 1, J))) * np.exp(-decay * (l + j))
    c[0] = c[0].real
    return Field(scale * c)


@pytest.fixture(scope="session")
def cubic_nl():
    return Nonlinearity(3, {3: CoeffProfile.constant(1.0)})


@pytest.fixture(scope="session")
def nonodd_nl():
    return Nonlinearity(2, {2: CoeffProfile(poly=(0.0, 1.0)), 3: CoeffProfile.constant(1.0)})


@pytest.fixture(scope="session")
def cubic_sched():
    return NashMoserSchedule(L0=8, p_max=2)


@pytest.fixture(scope="session")
def cubic_cp(cubic_nl):
    return find_critical_point(cubic_nl, CUBIC_L, CUBIC_J, Q2Config(N=1), N="auto")


@pytest.fixture(scope="session")
def cubic_branch(cubic_nl, cubic_cp, cubic_sched):
    return continue_branch(cubic_nl, cubic_cp, cubic_sched, (0.0,) + CUBIC_DELTAS, Q2Config(N=cubic_cp.N))


@pytest.fixture(scope="session")
def nonodd_cp(nonodd_nl):
    return find_critical_point(nonodd_nl, CUBIC_L, CUBIC_J, Q2Config(N=1), N="auto")


@pytest.fixture(scope="session")
def nonodd_branch(nonodd_nl, nonodd_cp, cubic_sched):
    return continue_branch(nonodd_nl, nonodd_cp, cubic_sched, NONODD_DELTAS, Q2Config(N=nonodd_cp.N))


# acceptance summary ------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
