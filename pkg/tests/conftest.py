import numpy as np
import pytest

from clonetrack.imaging import VoxelGrid, VoxelSpacing


@pytest.fixture
def unit_spacing():
    return VoxelSpacing(1.0, 1.0, 1.0)


@pytest.fixture
def aniso_spacing():
    return VoxelSpacing(0.8, 0.8, 1.0)


def make_grid(values, spacing=None):
    values = np.asarray(values)
    return VoxelGrid(values=values, spacing=spacing or VoxelSpacing(1.0, 1.0, 1.0))


@pytest.fixture
def grid_factory():
    return make_grid
