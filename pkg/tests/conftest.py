import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("chainlab", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("chainlab")

MIX = np.array([[0.5, 0.5], [0.5, 0.5]])
ONE_WAY = np.array([[1.0, 0.0], [0.5, 0.5]])
LAZY = np.array([[0.9, 0.1], [0.1, 0.9]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
