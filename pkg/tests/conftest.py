import numpy as np
import pytest

from hnslab.spectral import GridSpec


@pytest.fixture
def grid2d():
    return GridSpec(2, 32)


@pytest.fixture
def grid2d_64():
    return GridSpec(2, 64)


@pytest.fixture
def grid3d():
    return GridSpec(3, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
