import numpy as np
import pytest

from nlchb.grid import GridSpec
from nlchb.kernel import ConvolutionEngine, KernelSpec
from nlchb.potential import PotentialSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid16():
    return GridSpec(16, 16)


@pytest.fixture
def gauss():
    return KernelSpec.gaussian(0.05)


@pytest.fixture
def quartic():
    return PotentialSpec.quartic()


@pytest.fixture
def engine16(grid16, gauss):
    return ConvolutionEngine(grid16, gauss)
