import numpy as np
import pytest

from stabledecay import SphericalDensity, StableSpec


@pytest.fixture(scope="session")
def iso15():
    return StableSpec(1.5, SphericalDensity.constant(2))


@pytest.fixture(scope="session")
def iso06():
    return StableSpec(0.6, SphericalDensity.constant(2))


@pytest.fixture(scope="session")
def tilt15():
    return StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0]))


@pytest.fixture(scope="session")
def tilt15_e1():
    return StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [1.0, 0.0]))


@pytest.fixture(scope="session")
def tilt06():
    return StableSpec(0.6, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [1.0, 0.0]))


@pytest.fixture(scope="session")
def drift1():
    return StableSpec(1.0, SphericalDensity.constant(2), gamma=np.array([0.5, 0.0]))
