import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dofw import kernels, losses, network, sets

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_setup():
    n, d, T = 5, 4, 60
    stream = losses.generate_ridge(n, d, T, seed=3)
    sched = network.generate_schedule(n, T, 5, seed=3, topology=network.CYCLE_SPLIT)
    return stream, sched, sets.simplex(d)


def all_sets(d):
    return [sets.simplex(d), sets.l1_ball(d, 1.7), sets.box(d, -0.5, np.linspace(0.5, 2.0, d))]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
