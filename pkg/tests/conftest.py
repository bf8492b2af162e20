import numpy as np
import pytest

from quadtrain.policy import ObservationVariant, PolicyMatrix


@pytest.fixture
def falling_policy():
    # saturated deltas: shove all feet sideways and unload one diagonal
    w = np.zeros((12, 14))
    for k in range(8, 12):
        w[k, [3, 6, 9, 12]] = 50.0
        w[k, [4, 13]] = 50.0
    return PolicyMatrix(w, ObservationVariant.IMU)
