import numpy as np
import pytest

from powertalk import (
    ConstraintSet,
    LoadModel,
    SamplingConfig,
    SystemConfig,
    VscParams,
    default_config,
)


@pytest.fixture
def cfg():
    """Reference scenario used throughout the suite."""
    return default_config()


@pytest.fixture
def point_cfg():
    """Point-mass load at 10 ohm with lowered voltage floor.

    g = 1000/3 V and h = 5/3 ohm there, handy for hand-checked values.
    """
    return SystemConfig(
        receiver=VscParams(400.0, 2.0),
        pilot=VscParams(400.0, 2.0),
        load=LoadModel.point(10.0),
        constraints=ConstraintSet(280.0, 399.0, 40.0),
        sampling=SamplingConfig.from_line_noise(0.1, 100),
        gamma=0.004,
    )


def assert_close(actual, expected, rtol=1e-12, atol=0.0):
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)
