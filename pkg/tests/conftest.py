import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rsvlbfgs import SPD, Sphere, gen_eig_data, gen_spd_data

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

MANIFOLDS = {
    "sphere3": lambda: Sphere(3),
    "sphere10": lambda: Sphere(10),
    "spd2": lambda: SPD(2),
    "spd4": lambda: SPD(4),
}


@pytest.fixture(params=sorted(MANIFOLDS))
def manifold(request):
    return MANIFOLDS[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_karcher():
    return gen_spd_data(4, 8, 10.0, seed=3)


@pytest.fixture(scope="session")
def small_eig():
    return gen_eig_data(12, 60, 0.2, seed=5)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
