import math

import pytest
from hypothesis import HealthCheck, settings

from backflow_lab.states import CatState, RescaledParams

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("default")

# reference states named by what they show
MAX_BACKFLOW = RescaledParams(3.0, 11.0, 1.9, math.pi)
TRACE_STATE = RescaledParams(3.0, 11.0, 2.0, math.pi / 4)
SMOOTHING_STATES = [RescaledParams(3.0, 7.0, 2.0, math.pi), RescaledParams(3.0, 6.0, 2.0, math.pi),
                    RescaledParams(3.0, 10.0, 3.0, math.pi)]


@pytest.fixture
def trace_state():
    return CatState.from_params(TRACE_STATE, sigma=10.0)


@pytest.fixture
def max_state():
    return CatState.from_params(MAX_BACKFLOW)
