import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flatdiss import LatticeSpec, build_tasaki, eigendecompose

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def tasaki30():
    h = build_tasaki(LatticeSpec(30))
    return h, eigendecompose(h)
