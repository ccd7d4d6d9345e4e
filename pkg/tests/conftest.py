import numpy as np
import pytest

from models import GaborParams
from utils.config import get_settings

# N = K*L, P = M/L = 4, Q/(2P) = 1, K/P = 4; L and N even
NORMAL = GaborParams(N=32, K=16, L=2, M=8, Q=8, a=0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def normal_params():
    return NORMAL


@pytest.fixture
def random_signal(rng):
    def make(n):
        return rng.standard_normal(n) + 1j * rng.standard_normal(n)

    return make


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings(refresh=True)
    yield
    get_settings(refresh=True)
