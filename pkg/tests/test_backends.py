"""Compiled and numpy kernel backends must agree and follow the same contract."""

import os
import subprocess
import sys

import numpy as np
import pytest

from kme_dyn import _backend, _pykernels
from kme_dyn.kernels import Exponential, Gaussian, Linear, Polynomial

from conftest import ALL_KERNELS

compiled = pytest.mark.skipif(len(_backend.available()) < 2, reason="extension not built")


def _case(seed, n, m, d):
    g = np.random.default_rng(seed)
    return (np.ascontiguousarray(g.normal(size=(n, d))), g.normal(size=n),
            np.ascontiguousarray(g.normal(size=(m, d))), g.normal(size=m))


@pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.label)
def test_gram_against_pointwise(backend, kernel):
    X, _, Y, _ = _case(0, 13, 9, 3)
    K = backend.gram(X, Y, kernel._code, kernel._param, False)
    ref = np.array([[kernel(x, y) for y in Y] for x in X])
    np.testing.assert_allclose(K, ref, rtol=1e-12)


@pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.label)
@pytest.mark.parametrize("symmetric", [False, True])
def test_weighted_sum_against_gram(backend, kernel, symmetric):
    X, a, Y, b = _case(1, 40, 40, 2)
    if symmetric:
        Y = X
    K = _pykernels.gram(X, Y, kernel._code, kernel._param, symmetric)
    got = backend.weighted_sum(X, a, Y, b, kernel._code, kernel._param, symmetric)
    assert got == pytest.approx(a @ K @ b, rel=1e-11, abs=1e-12 * np.abs(K).max())


def test_symmetric_gram_mirrored(backend):
    X, *_ = _case(2, 25, 1, 2)
    K = backend.gram(X, X, Gaussian(0.4)._code, Gaussian(0.4)._param, True)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)


def test_exponential_overflow_flag(backend):
    X = np.array([[30.0], [0.0]])
    with pytest.raises(OverflowError):
        backend.gram(X, X, Exponential._code, 700.0, True)
    with pytest.raises(OverflowError):
        backend.weighted_sum(X, np.ones(2), X, np.ones(2), Exponential._code, 700.0, False)


def test_large_block_path(backend):
    # spans several row blocks of the numpy fallback
    X, a, Y, b = _case(3, 3000, 900, 1)
    k = Gaussian(0.5)
    got = backend.weighted_sum(X, a, Y, b, k._code, k._param, False)
    ref = _pykernels.weighted_sum(X, a, Y, b, k._code, k._param, False)
    assert got == pytest.approx(ref, rel=1e-12)


@compiled
@pytest.mark.parametrize("kernel", ALL_KERNELS + [Polynomial(5), Linear()], ids=lambda k: k.label)
def test_compiled_matches_fallback(kernel):
    c = _backend.available()[1]
    X, a, Y, b = _case(4, 257, 131, 3)
    for sym, Y_ in ((False, Y), (True, X)):
        b_ = b if not sym else a[::-1].copy()
        kc = c.gram(X, Y_, kernel._code, kernel._param, sym)
        kp = _pykernels.gram(X, Y_, kernel._code, kernel._param, sym)
        np.testing.assert_allclose(kc, kp, rtol=1e-13, atol=1e-300)
        sc = c.weighted_sum(X, a, Y_, b_, kernel._code, kernel._param, sym)
        sp = _pykernels.weighted_sum(X, a, Y_, b_, kernel._code, kernel._param, sym)
        assert sc == pytest.approx(sp, rel=1e-11, abs=1e-12 * np.abs(kp).max())


@compiled
def test_compiled_is_default():
    if os.environ.get("KME_DYN_PURE_PYTHON", "").strip() not in ("", "0"):
        pytest.skip("fallback forced by environment")
    assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    code = "import kme_dyn; print(kme_dyn.BACKEND)"
    env = dict(os.environ, KME_DYN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"


def test_no_flush_to_zero_side_effect():
    # the compiled module is already loaded here; it must not have set flush-to-zero
    assert _backend.BACKEND in ("cython", "python")
    tiny = np.float64(np.finfo(float).tiny)
    assert tiny / 2 > 0.0
    assert np.nextafter(0.0, 1.0) > 0.0


def test_gaussian_far_tail_zero_and_near_tail_positive(backend):
    k = Gaussian(1.0)
    X = np.array([[0.0]])
    Y = np.array([[37.0], [38.0], [1e6]])
    K = backend.gram(X, Y, k._code, k._param, False)
    # exp(-684.5) is representable, exp(-722) is forced to zero
    assert K[0, 0] > 0.0
    assert K[0, 1] == 0.0 and K[0, 2] == 0.0
