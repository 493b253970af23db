import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_spins(rng, n):
    return (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
