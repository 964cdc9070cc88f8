"""Shared fixtures: small grids and kernel specs reused across test modules."""

import numpy as np
import pytest

from nlparab.grids import Grid
from nlparab.kernels import FracParams, KernelSpec


@pytest.fixture
def grid_1d():
    """Thirteen nodes, three interior; the smallest admissible 1D lattice."""
    return Grid(1, 1.0, 3.0, 0.5)


@pytest.fixture
def grid_1d_fine():
    return Grid(1, 1.0, 3.0, 1.0 / 16.0)


@pytest.fixture
def grid_2d():
    return Grid(2, 1.0, 2.0, 0.25)


@pytest.fixture
def unit_spec_1d():
    """Pure 1D kernel, a = 1, alpha = 1."""
    return KernelSpec(FracParams(1, 1.0))


@pytest.fixture
def unit_spec_2d():
    return KernelSpec(FracParams(2, 1.0))


def make_spec(d, alpha, lam=1.0, Lam=1.0, coefficient=None, structure="absolutely_continuous"):
    params = FracParams(d, alpha, lam=lam, Lam=Lam)
    if coefficient is None:
        return KernelSpec(params, structure=structure)
    return KernelSpec(params, coefficient=coefficient, structure=structure)


def rng_fields(grid, n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, grid.n_nodes))
