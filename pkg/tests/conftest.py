import math

import numpy as np
import pytest

TWO_PI = 2.0 * math.pi


def mhz(x):
    """omega/2pi in MHz -> rad/us."""
    return TWO_PI * x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = z @ z.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (z + z.conj().T)
