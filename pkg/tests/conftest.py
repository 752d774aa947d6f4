import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from artcollector.dynamics import Policy
from artcollector.env import BernSpec, bern_stream

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

MAIN = BernSpec(0.3, 0.2, 2.0)
MAIN_POLICY = Policy(0.265, 0.284)
GRID5 = [Policy(a, b) for a in (0.1, 0.3, 0.5, 0.7, 0.9) for b in (0.1, 0.3, 0.5, 0.7, 0.9)]


@pytest.fixture
def main_stream():
    return bern_stream(MAIN, seed=2024)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
