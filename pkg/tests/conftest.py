import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ncdet", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ncdet")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
