import os

import pytest
from hypothesis import HealthCheck, settings

from icwlab.weights import WeightSequence, for_size

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def homogeneous():
    return lambda n: for_size(WeightSequence([1.0]), n)


@pytest.fixture
def two_point():
    """Weights alternating 1, 2: the law puts mass 1/2 on each."""
    return lambda n: for_size(WeightSequence([1.0, 2.0]), n)
