import numpy as np
import pytest

from afem_newton.mesh import from_arrays, initial_mesh


@pytest.fixture
def right_triangle():
    """Unit right triangle with legs on the axes."""
    return from_arrays([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


@pytest.fixture
def square():
    return initial_mesh("unit_square")


@pytest.fixture
def criss_cross():
    """Unit square split into four triangles through its centre."""
    v = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    t = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]
    return from_arrays(np.array(v, dtype=float), t)


@pytest.fixture
def lshape():
    return initial_mesh("l_shape")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
