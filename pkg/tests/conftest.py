import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from onesided import LatticeLaw

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")



def walk(p: float) -> LatticeLaw:
    """Simple +-1 walk with up-probability p."""
    return LatticeLaw(1.0, [[-1, 1 - p], [1, p]])


@pytest.fixture
def walk25():
    return walk(0.25)


@pytest.fixture
def walk50():
    return walk(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
