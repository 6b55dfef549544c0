import sys
import time
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jointsense.exceptions import ConvergenceWarning  # noqa: E402
from jointsense.duals import SensingNumerics, TrainerConfig, train  # noqa: E402
from jointsense.sim import table1_scenario  # noqa: E402

TRAIN_SEED = 0


@pytest.fixture(scope="session")
def scenario():
    return table1_scenario()


@pytest.fixture(scope="session")
def timed_training(scenario):
    """Default training of the optimal policy on the Table 1 system and its wall time (about 40 s)."""
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        result = train(scenario, TrainerConfig(), SensingNumerics(), seed=TRAIN_SEED, policy="optimal")
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def trained_optimal(timed_training):
    return timed_training[0]


# Acceptance verdicts, echoed in the terminal summary so they survive output capture.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
