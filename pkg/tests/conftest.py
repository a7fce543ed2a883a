"""
Shared fixtures: grids, profiles and physical parameters
"""
import math

import numpy as np
import pytest

from processors.contour import PhysParams
from processors.initdata import ProfileKind, ProfileSpec, build_profile
from processors.quadrature import QuadratureConfig
from processors.spectral import GridFunction, GridSpec


@pytest.fixture
def unit_grid():
    """64 points on [-pi, pi)"""
    return GridSpec(64, math.pi)


@pytest.fixture
def wide_grid():
    """128 points on [-16 pi, 16 pi)"""
    return GridSpec(128, 16.0 * math.pi)


@pytest.fixture
def physics():
    return PhysParams.normalized()


@pytest.fixture
def quad():
    return QuadratureConfig()


@pytest.fixture
def bump(wide_grid):
    """Mean-free Gaussian of width 4 with slope 0.5"""
    return build_profile(ProfileSpec(kind=ProfileKind.GAUSSIAN_BUMP, width=4.0, target_slope=0.5), wide_grid)


@pytest.fixture
def gentle_bump(wide_grid):
    """Mean-free Gaussian of width 4 with slope 0.3"""
    return build_profile(ProfileSpec(kind=ProfileKind.GAUSSIAN_BUMP, width=4.0, target_slope=0.3), wide_grid)


@pytest.fixture
def cosine(unit_grid):
    return GridFunction.from_callable(unit_grid, np.cos)


@pytest.fixture
def zero(wide_grid):
    return GridFunction.zeros(wide_grid)


@pytest.fixture
def write_config(tmp_path):
    """Write INI text to a file in tmp_path and return its path"""
    def write(text: str, name: str = 'run.ini'):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write
