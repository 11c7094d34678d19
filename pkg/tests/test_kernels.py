import os
import subprocess
import sys

import numpy as np
import pytest

from isacpulse import kernels
from conftest import naive_af

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")


def _case(rng, n=40, K=40):
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lags = np.arange(-n - 2, n + 3)
    dops = rng.integers(-2 * K, 2 * K, size=lags.size)
    return x, y, lags, dops, K


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_lag_products_match_double_loop(rng, use_numba):
    x, _, lags, dops, K = _case(rng)
    out = kernels.lag_products(x, x, lags, dops, K, use_numba=use_numba)
    ref = np.array([naive_af(x, int(w), int(v), K) for w, v in zip(lags, dops)])
    np.testing.assert_allclose(out, ref, atol=1e-12)


@needs_numba
def test_numba_and_numpy_paths_agree(rng):
    x, y, lags, dops, K = _case(rng)
    a = kernels.lag_products(x, y, lags, dops, K, use_numba=True)
    b = kernels.lag_products(x, y, lags, dops, K, use_numba=False)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    g = x.real.copy()
    coef = rng.random(lags.size)
    psi = kernels.lag_products(g, g, lags, dops, K)
    np.testing.assert_allclose(kernels.lag_gradient(g, psi, coef, lags, dops, K, use_numba=True),
                               kernels.lag_gradient(g, psi, coef, lags, dops, K, use_numba=False),
                               atol=1e-11)

    frames = rng.standard_normal((5, 60)) + 1j * rng.standard_normal((5, 60))
    fl, fd = np.arange(-3, 10), np.arange(13) % 4
    np.testing.assert_allclose(kernels.frame_products(frames, fl, fd, K, use_numba=True),
                               kernels.frame_products(frames, fl, fd, K, use_numba=False), atol=1e-11)

    rx = np.concatenate([np.zeros(7), x, np.zeros(5)])
    d = np.arange(0, 13)
    np.testing.assert_allclose(kernels.fold_delay_products(x, rx, d, K, use_numba=True),
                               kernels.fold_delay_products(x, rx, d, K, use_numba=False), atol=1e-12)


def test_lag_gradient_matches_finite_differences(rng):
    K = 24
    g = rng.standard_normal(K)
    lags = np.array([-5, -2, 1, 3, 7])
    dops = np.array([0, 1, 0, 2, 0])
    coef = rng.random(lags.size)

    def f(h):
        return float(np.sum(coef * np.abs(kernels.lag_products(h, h, lags, dops, K)) ** 2))

    psi = kernels.lag_products(g, g, lags, dops, K)
    grad = kernels.lag_gradient(g, psi, coef, lags, dops, K)
    h = 1e-6
    fd = np.array([(f(g + h * e) - f(g - h * e)) / (2 * h) for e in np.eye(K)])
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_fold_delay_products_give_shifted_correlation(rng):
    K = 16
    ref = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    x = np.concatenate([np.zeros(3), ref, np.zeros(4)])
    fold = kernels.fold_delay_products(ref, x, np.array([3]), K)[0]
    # zero Doppler bin of the RD map is the plain correlation, equal to the energy at the true delay
    assert abs(fold.sum() - np.vdot(ref, ref)) < 1e-10


def test_mismatched_lag_shapes_raise():
    with pytest.raises(ValueError):
        kernels.lag_products(np.ones(4), np.ones(4), [0, 1], [0], 4)


def test_env_flag_disables_numba():
    env = dict(os.environ, ISACPULSE_DISABLE_NUMBA="1")
    code = "from isacpulse import kernels; print(kernels.HAVE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_requesting_numba_without_it_raises(monkeypatch):
    monkeypatch.setattr(kernels, "HAVE_NUMBA", False)
    with pytest.raises(RuntimeError):
        kernels.lag_products(np.ones(3), np.ones(3), [0], [0], 3, use_numba=True)
