import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qreglp import PolytopeSpec, QlpInstance

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def interval():
    return PolytopeSpec.interval(0.0, 1.0)


@pytest.fixture
def interval_inst(interval):
    # The sharp textbook example: minimize -x + x^2/eta on [0, 1].
    return QlpInstance(interval, np.array([-1.0]))


@pytest.fixture
def square():
    return PolytopeSpec.box([0.0, 0.0], [1.0, 1.0])
