"""Shared fixtures for the msdiffeo tests."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from msdiffeo.fields import Grid2, LandmarkSet, VectorField
from msdiffeo.kernels import FiniteKernelSpec, GaussianKernel


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running convergence studies")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    return Grid2.unit(17)


@pytest.fixture
def rotation(grid):
    """Small rotation about the centre of the unit square"""
    return VectorField.from_function(grid, lambda X, Y: (0.2 * (Y - 0.5), -0.2 * (X - 0.5)))


@pytest.fixture
def two_scale_kernel():
    return FiniteKernelSpec((GaussianKernel(0.25), GaussianKernel(0.08)))


@pytest.fixture
def landmark_pair():
    source = LandmarkSet([[0.35, 0.40], [0.55, 0.35], [0.60, 0.60], [0.40, 0.62]])
    target = LandmarkSet([[0.37, 0.42], [0.56, 0.33], [0.62, 0.63], [0.38, 0.60]])
    return source, target
