"""
Shared fixtures: random streams, small models, tiny enumerable models and a
central-difference gradient helper
"""

from typing import Callable

import numpy as np
import pytest

from micmco.engine import RngStream, StreamPurpose, Tape
from micmco.modeling import LatentSpec, init_model
from micmco.oracle import random_tiny_model


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (f(up) - f(down)) / (2.0 * h)
    return grad


@pytest.fixture
def numeric_grad():
    return central_difference


@pytest.fixture
def tape():
    return Tape()


@pytest.fixture
def rng():
    return RngStream(1234, 7)


@pytest.fixture
def continuous_params():
    spec = LatentSpec.continuous(3)
    return init_model(spec, 6, 5, 4, RngStream.for_purpose(0, StreamPurpose.INIT))


@pytest.fixture
def categorical_params():
    spec = LatentSpec.categorical(2, 3)
    return init_model(spec, 6, 5, 4, RngStream.for_purpose(0, StreamPurpose.INIT))


@pytest.fixture
def tiny_model():
    return random_tiny_model(RngStream.for_purpose(3, StreamPurpose.ORACLE), 3, 3)
