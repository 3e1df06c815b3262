import numpy as np
import pytest


def central_diff_grad(f, x, h=1e-6):
    """Independent finite-difference gradient oracle."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
