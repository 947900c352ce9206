import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("aximhd", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "aximhd"))


def observed_orders(hs, errors):
    """Successive log-log slopes of ``errors`` against ``hs``."""
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
