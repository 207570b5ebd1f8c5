import os

import numpy as np
import pytest

from plateau_fem.mesh import TetMesh, build_box_mesh

FULL = os.environ.get("PLATEAU_FULL") == "1"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def single_tet():
    nodes = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return TetMesh.from_cells(nodes, np.array([[0, 1, 2, 3]]))


@pytest.fixture(scope="session")
def unit_cube():
    return build_box_mesh((1, 1, 1), lower=(0, 0, 0), upper=(1, 1, 1))


@pytest.fixture(scope="session")
def box16():
    return build_box_mesh((16, 16, 16), (2.0, 2.0, 2.0))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
