import numpy as np
import pytest

from viakernel.cone import ConvexCone


def cone_zoo():
    """Five orthants plus polyhedral cones in R^2 and R^3."""
    cones = [
        ConvexCone.orthant([1, 1]),
        ConvexCone.orthant([1, -1]),
        ConvexCone.orthant([-1, -1, 1, 1]),
        ConvexCone.orthant([1, 1, 1, 1]),
        ConvexCone.orthant([-1, 1, -1]),
    ]
    # wedge between (1,0) and (1,1)
    cones.append(ConvexCone.polyhedral(normals=[[0, 1], [1, -1]], generators=[[1, 0], [1, 1]]))
    # square-based pyramid around e3
    gens = [[1, 1, 1], [1, -1, 1], [-1, 1, 1], [-1, -1, 1]]
    normals = [[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]]
    cones.append(ConvexCone.polyhedral(normals=normals, generators=gens))
    return cones


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
