import numpy as np
import pytest

from kcs.datasets import human15_mean_pose, human15_skeleton
from kcs.kinematic_chain import Skeleton


def random_tree(rng, j):
    parents = [-1] + [int(rng.integers(0, i)) for i in range(1, j)]
    return Skeleton.from_parents(parents)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def human():
    return human15_skeleton()


@pytest.fixture(scope="session")
def mean_pose():
    return human15_mean_pose()


ACCEPTANCE_LINES = []


def record_criterion(number, status, summary):
    """Print and remember one acceptance line; ``status`` is PASS, FAIL or SKIP."""
    line = f"[{status}] criterion {number}: {summary}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
