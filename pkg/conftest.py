import numpy as np
import pytest

from decodetools import code_geometry
from decodetools import noise_sampler


@pytest.fixture(scope='session')
def d3():
    return code_geometry.build_layout(3, 3)


@pytest.fixture(scope='session')
def d5():
    return code_geometry.build_layout(5, 5)


@pytest.fixture(scope='session')
def circuit3(d3):
    return noise_sampler.ExtractionCircuit(d3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
