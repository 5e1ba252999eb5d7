from unittest import mock

import numpy as np
import pytest

from thinphase.extension import trivial_solution
from thinphase.grid import GridSpec, ScalarField, build_grid


# This fixture is cheap so we just do it for every function it's requested by
# to ensure that functions which aren't opted-in themselves or by their module
# remain unaffected
@pytest.fixture(scope="function")
def empty_environ():
    with mock.patch.dict("os.environ", clear=True) as mocked_environ:
        yield mocked_environ


@pytest.fixture(scope="session")
def line_grid():
    """One thin dimension, alpha = 1/2, 65 x 33 nodes."""
    return build_grid(GridSpec(1, 0.5, 1.0, 1.0 / 32))


@pytest.fixture(scope="session")
def tiny_grid():
    """Seven free slab nodes, small enough for exhaustive search."""
    return build_grid(GridSpec(1, 0.5, 1.0, 0.25))


@pytest.fixture(scope="session")
def plane_grid():
    """Two thin dimensions, alpha = 1/2, 33 x 33 x 17 nodes."""
    return build_grid(GridSpec(2, 0.5, 1.0, 1.0 / 16))


@pytest.fixture(scope="session")
def trivial_line(line_grid):
    return trivial_solution(line_grid)


@pytest.fixture(scope="session")
def quadrant_cone(plane_grid):
    """Homogeneous field positive off the third quadrant of the slab (not a minimiser)."""
    values = np.maximum(
        trivial_solution(plane_grid, (1.0, 0.0)).values,
        trivial_solution(plane_grid, (0.0, 1.0)).values,
    )
    return ScalarField(plane_grid, values)
