import numpy as np
import pytest
import scipy.fft as sfft

from nlslab.fields import ComplexField, RadialGrid
from nlslab.groundstate import certified_ground_state


@pytest.fixture(scope="session")
def gs():
    return certified_ground_state()


@pytest.fixture(scope="session")
def radial_grid():
    return RadialGrid()


def make_random_field(grid, seed, k_cut=150.0):
    rng = np.random.default_rng(seed)
    k = np.arange(1, grid.n)
    coeff = (rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size))
    coeff *= np.exp(-((k / k_cut) ** 2))
    return ComplexField(grid, sfft.dst(coeff, type=1) / grid.r)
