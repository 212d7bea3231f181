import numpy as np
import pytest
from hypothesis import settings

from hyplab.models import Box, Burgers, LinearSystem, PSystem

settings.register_profile("lab", max_examples=50, deadline=None)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def burgers():
    return Burgers()


@pytest.fixture(scope="session")
def burgers_wide():
    return Burgers(Box([-1.0], [2.5]))


@pytest.fixture(scope="session")
def psystem():
    return PSystem()


@pytest.fixture(scope="session")
def linear():
    return LinearSystem()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240311))
