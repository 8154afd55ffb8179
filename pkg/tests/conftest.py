import numpy as np
import pytest


def two_pass(x):
    """Plain two-pass population moments, independent of the package."""
    x = np.asarray(x, dtype=np.longdouble)
    n = x.size
    mean = x.sum() / n
    d = x - mean
    m2 = (d**2).sum() / n
    m3 = (d**3).sum() / n
    m4 = (d**4).sum() / n
    return float(mean), float(np.sqrt(m2)), float(m3 / m2**1.5), float(m4 / m2**2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
