"""Hot loops shared by the ambiguity-function, optimizer and simulator code.

Each kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version with identical semantics.  The numba path is used when numba imports
cleanly and the environment variable ``ISACPULSE_DISABLE_NUMBA`` is unset (or
set to ``0``/``false``).  ``benchmarks/bench_kernels.py`` times both paths.

All kernels use the same lag-product convention

    P(x, y)[i] = sum_k conj(x[k]) * y[k - w_i] * exp(2j*pi*v_i*k/K)

with samples outside ``0..n-1`` treated as zero (non-circular shifts).  The
complex exponential is read from a table of K-th roots of unity indexed by
``(v*k) mod K`` so both paths produce the same rounding.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("ISACPULSE_DISABLE_NUMBA", "0").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - exercised implicitly by the import
    if _DISABLED:
        raise ImportError("numba disabled by ISACPULSE_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def roots_of_unity(K: int) -> np.ndarray:
    """Return ``exp(2j*pi*m/K)`` for ``m = 0..K-1``."""
    return np.exp(2j * np.pi * np.arange(K) / K)


def _prep(lags, dops, K):
    lags = np.ascontiguousarray(lags, dtype=np.int64)
    dops = np.ascontiguousarray(np.mod(dops, K), dtype=np.int64)
    if lags.shape != dops.shape:
        raise ValueError("lags and dops must have the same shape")
    return lags, dops


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


@njit(cache=True)
def _lag_products_nb(x, y, lags, dops, roots):
    n = x.shape[0]
    K = roots.shape[0]
    out = np.zeros(lags.shape[0], dtype=np.complex128)
    for i in range(lags.shape[0]):
        w = lags[i]
        v = dops[i]
        lo = max(0, w)
        hi = min(n, n + w)
        acc = 0.0 + 0.0j
        for k in range(lo, hi):
            acc += np.conj(x[k]) * y[k - w] * roots[(v * k) % K]
        out[i] = acc
    return out


@njit(cache=True)
def _lag_gradient_nb(g, psi, coef, lags, dops, roots):
    n = g.shape[0]
    K = roots.shape[0]
    out = np.zeros(n)
    for i in range(lags.shape[0]):
        w = lags[i]
        v = dops[i]
        c = 2.0 * coef[i]
        pc = np.conj(psi[i])
        for j in range(n):
            acc = 0.0 + 0.0j
            if 0 <= j - w < n:
                acc += g[j - w] * roots[(v * j) % K]
            if 0 <= j + w < n:
                acc += g[j + w] * roots[(v * (j + w)) % K]
            out[j] += c * (pc * acc).real
    return out


@njit(cache=True)
def _frame_products_nb(frames, lags, dops, roots):
    m_frames, n = frames.shape
    K = roots.shape[0]
    out = np.zeros((m_frames, lags.shape[0]), dtype=np.complex128)
    for f in range(m_frames):
        for i in range(lags.shape[0]):
            w = lags[i]
            v = dops[i]
            lo = max(0, w)
            hi = min(n, n + w)
            acc = 0.0 + 0.0j
            for k in range(lo, hi):
                acc += np.conj(frames[f, k]) * frames[f, k - w] * roots[(v * k) % K]
            out[f, i] = acc
    return out


@njit(cache=True)
def _fold_delay_products_nb(ref, x, delays, K):
    n_ref = ref.shape[0]
    n_x = x.shape[0]
    out = np.zeros((delays.shape[0], K), dtype=np.complex128)
    for d in range(delays.shape[0]):
        u = delays[d]
        lo = max(0, u)
        hi = min(n_x, n_ref + u)
        for k in range(lo, hi):
            out[d, k % K] += np.conj(ref[k - u]) * x[k]
    return out


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _lag_products_np(x, y, lags, dops, roots):
    n = x.shape[0]
    K = roots.shape[0]
    k_all = np.arange(n)
    xc = np.conj(x)
    out = np.zeros(lags.shape[0], dtype=np.complex128)
    for i, (w, v) in enumerate(zip(lags, dops)):
        lo, hi = max(0, w), min(n, n + w)
        if hi <= lo:
            continue
        k = k_all[lo:hi]
        out[i] = np.sum(xc[lo:hi] * y[lo - w:hi - w] * roots[(v * k) % K])
    return out


def _lag_gradient_np(g, psi, coef, lags, dops, roots):
    n = g.shape[0]
    K = roots.shape[0]
    j = np.arange(n)
    out = np.zeros(n)
    for i, (w, v) in enumerate(zip(lags, dops)):
        acc = np.zeros(n, dtype=np.complex128)
        lo, hi = max(0, w), min(n, n + w)
        if hi > lo:
            acc[lo:hi] += g[lo - w:hi - w] * roots[(v * j[lo:hi]) % K]
        lo2, hi2 = max(0, -w), min(n, n - w)
        if hi2 > lo2:
            acc[lo2:hi2] += g[lo2 + w:hi2 + w] * roots[(v * (j[lo2:hi2] + w)) % K]
        out += 2.0 * coef[i] * (np.conj(psi[i]) * acc).real
    return out


def _frame_products_np(frames, lags, dops, roots):
    m_frames, n = frames.shape
    K = roots.shape[0]
    fc = np.conj(frames)
    k_all = np.arange(n)
    out = np.zeros((m_frames, lags.shape[0]), dtype=np.complex128)
    for i, (w, v) in enumerate(zip(lags, dops)):
        lo, hi = max(0, w), min(n, n + w)
        if hi <= lo:
            continue
        ph = roots[(v * k_all[lo:hi]) % K]
        out[:, i] = np.sum(fc[:, lo:hi] * frames[:, lo - w:hi - w] * ph, axis=1)
    return out


def _fold_delay_products_np(ref, x, delays, K):
    n_ref, n_x = ref.shape[0], x.shape[0]
    out = np.zeros((delays.shape[0], K), dtype=np.complex128)
    for d, u in enumerate(delays):
        lo, hi = max(0, u), min(n_x, n_ref + u)
        if hi <= lo:
            continue
        prod = np.conj(ref[lo - u:hi - u]) * x[lo:hi]
        np.add.at(out[d], np.arange(lo, hi) % K, prod)
    return out


# ---------------------------------------------------------------------------
# public dispatchers
# ---------------------------------------------------------------------------


def lag_products(x, y, lags, dops, K: int, *, use_numba: bool | None = None) -> np.ndarray:
    """Evaluate ``sum_k conj(x[k]) y[k-w] exp(2j pi v k / K)`` for each (w, v)."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    y = np.ascontiguousarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    lags, dops = _prep(lags, dops, K)
    fn = _lag_products_nb if _pick(use_numba) else _lag_products_np
    return fn(x, y, lags, dops, roots_of_unity(K))


def lag_gradient(g, psi, coef, lags, dops, K: int, *, use_numba: bool | None = None) -> np.ndarray:
    """Gradient of ``sum_i coef_i |psi_i(g)|^2`` with respect to a real pulse ``g``.

    ``psi`` must hold ``lag_products(g, g, lags, dops, K)``.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    lags, dops = _prep(lags, dops, K)
    fn = _lag_gradient_nb if _pick(use_numba) else _lag_gradient_np
    return fn(g, psi, coef, lags, dops, roots_of_unity(K))


def frame_products(frames, lags, dops, K: int, *, use_numba: bool | None = None) -> np.ndarray:
    """Self lag products of every row of ``frames``; returns shape (n_frames, n_lags)."""
    frames = np.ascontiguousarray(np.atleast_2d(frames), dtype=np.complex128)
    lags, dops = _prep(lags, dops, K)
    fn = _frame_products_nb if _pick(use_numba) else _frame_products_np
    return fn(frames, lags, dops, roots_of_unity(K))


def fold_delay_products(ref, x, delays, K: int, *, use_numba: bool | None = None) -> np.ndarray:
    """Fold ``conj(ref[k-u]) x[k]`` onto ``k mod K`` for each delay ``u``.

    An FFT along the last axis of the result gives the delay-Doppler
    correlation ``sum_k conj(ref[k-u]) x[k] exp(-2j pi v k / K)``.
    """
    ref = np.ascontiguousarray(ref, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.complex128)
    delays = np.ascontiguousarray(delays, dtype=np.int64)
    fn = _fold_delay_products_nb if _pick(use_numba) else _fold_delay_products_np
    return fn(ref, x, delays, int(K))


def _pick(use_numba: bool | None) -> bool:
    if use_numba is None:
        return HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba path requested but numba is unavailable or disabled")
    return bool(use_numba)
