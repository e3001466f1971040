import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gcausal.data import GroupPartition, TimeSeriesPanel
from gcausal.forecaster import ForecasterConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    return TimeSeriesPanel(rng.normal(size=(300, 4)))


@pytest.fixture
def two_groups():
    return GroupPartition.contiguous([2, 2])


@pytest.fixture
def quick_forecaster():
    return ForecasterConfig(context_len=3, hidden_width=8, horizon=2, epochs=5, batch_size=32)
