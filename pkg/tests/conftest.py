import warnings

import numpy as np
import pytest

from cartdmp import quaternion as quat
from cartdmp.learning import synth_demo, train

ACCEPTANCE_LINES = []

REACH_GOAL_Q = quat.from_axis_angle([1.0, 1.0, 0.0], 1.0)


def record_criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _train(demo, n_basis=25):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return train(demo, n_basis=n_basis)[0]


@pytest.fixture(scope="session")
def reach_demo():
    return synth_demo("reach", 4.0, g=(0.3, 0.2, 0.1), q_g=REACH_GOAL_Q)


@pytest.fixture(scope="session")
def reach_model(reach_demo):
    return _train(reach_demo)


@pytest.fixture(scope="session")
def handover_demo():
    return synth_demo("handover_gt_pi", 4.0)


@pytest.fixture(scope="session")
def handover_model(handover_demo):
    return _train(handover_demo)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
