import numpy as np
import pytest

from oscilab.grid import CELL, NODE, Field


def random_cell_field(grid, kind, rng, scale=1.0):
    from oscilab.grid import component_shape

    shape = grid.cells + component_shape(kind, grid.n)
    vals = rng.normal(scale=scale, size=shape)
    if kind == "sym":
        vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
    return Field(grid, CELL, kind, vals)


def random_node_vector(grid, rng, scale=1.0):
    return Field(grid, NODE, "vector", rng.normal(scale=scale, size=grid.node_shape + (grid.n,)))


@pytest.fixture
def rng():
    return np.random.default_rng(20200403)
