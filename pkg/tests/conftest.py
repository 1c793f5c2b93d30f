import numpy as np
import pytest

from magsearch import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_gaussian(rng):
    return Dataset(np.ascontiguousarray(
        rng.standard_normal((200, 8)), dtype=np.float32))
