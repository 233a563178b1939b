import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dcm(rng, max_tilt=0.3):
    from rovernav.geodesy import euler_to_dcm

    r, p = rng.uniform(-max_tilt, max_tilt, 2)
    y = rng.uniform(-np.pi, np.pi)
    return euler_to_dcm(r, p, y)
