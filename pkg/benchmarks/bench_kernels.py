"""Time the numba and numpy implementations of each kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from isacpulse import kernels


def _time(fn, repeat):
    fn()  # warm-up (includes JIT compilation for the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can run")
    rng = np.random.default_rng(0)
    K = 256
    g = rng.standard_normal(K)
    lags = np.arange(-K + 1, K)
    dops = np.zeros_like(lags)
    psi = kernels.lag_products(g, g, lags, dops, K)
    coef = rng.random(lags.size)
    frames = rng.standard_normal((200, 64 * 8 + 127)) + 1j * rng.standard_normal((200, 64 * 8 + 127))
    flags = np.arange(0, 40)
    ref = frames[0]
    rx = np.concatenate([np.zeros(50), ref])
    delays = np.arange(0, 200)

    cases = {
        "lag_products (511 lags, L_g=256)": lambda nb: kernels.lag_products(g, g, lags, dops, K, use_numba=nb),
        "lag_gradient (511 lags, L_g=256)": lambda nb: kernels.lag_gradient(g, psi, coef, lags, dops, K, use_numba=nb),
        "frame_products (200 frames x 40 lags)": lambda nb: kernels.frame_products(frames, flags, np.zeros_like(flags), 128, use_numba=nb),
        "fold_delay_products (200 delays)": lambda nb: kernels.fold_delay_products(ref, rx, delays, K, use_numba=nb),
    }
    print(f"{'kernel':42s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s}")
    for name, fn in cases.items():
        t_np = _time(lambda: fn(False), args.repeat)
        if kernels.HAVE_NUMBA:
            assert np.allclose(fn(False), fn(True), rtol=1e-10, atol=1e-10), name
            t_nb = _time(lambda: fn(True), args.repeat)
            print(f"{name:42s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:9.1f}")
        else:
            print(f"{name:42s} {1e3 * t_np:11.3f} {'-':>11s} {'-':>9s}")


if __name__ == "__main__":
    main()
