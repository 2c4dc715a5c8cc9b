import numpy as np
import pytest

from kme_dyn import _backend
from kme_dyn.kernels import Exponential, Gaussian, Linear, Polynomial

ALL_KERNELS = [Linear(), Polynomial(2), Polynomial(3), Gaussian(0.7), Exponential()]


def naive_mmd_sq(X, Y, k):
    """Plain triple-sum V-statistic with uniform weights."""
    M, N = len(X), len(Y)
    xx = sum(k(X[i], X[j]) for i in range(M) for j in range(M)) / M**2
    yy = sum(k(Y[i], Y[j]) for i in range(N) for j in range(N)) / N**2
    xy = sum(k(X[i], Y[j]) for i in range(M) for j in range(N)) / (M * N)
    return xx - 2.0 * xy + yy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=_backend.available(), ids=lambda m: m.NAME)
def backend(request):
    return request.param
