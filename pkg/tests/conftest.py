import numpy as np
import pytest

from isacpulse.signal_core import FrameConfig, Pulse, make_constellation

# Scaled working point of the design experiments: 320 MHz sampling, 16 samples
# per symbol, 256-sample pulse, 256 symbols per frame.
DESIGN = FrameConfig(L=256, N_T=16, L_g=256, beta=0.3, f_s=320e6)
# Desk-scale configuration for Monte-Carlo checks.
DESK = FrameConfig(L=64, N_T=8, L_g=128, beta=0.3, f_s=160e6)
# Tiny configuration for brute-force oracles.
TINY = FrameConfig(L=6, N_T=4, L_g=16, beta=0.3, f_s=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def qam16():
    return make_constellation("16QAM")


def random_pulse(rng, n, complex_=True):
    g = rng.standard_normal(n) + (1j * rng.standard_normal(n) if complex_ else 0)
    return Pulse(g).normalized()


def naive_af(g, u, v, K):
    """Direct double-loop evaluation of sum_k conj(g_k) g_{k-u} exp(2j pi v k / K)."""
    total = 0j
    n = len(g)
    for k in range(n):
        j = k - u
        if 0 <= j < n:
            total += np.conj(g[k]) * g[j] * np.exp(2j * np.pi * v * k / K)
    return total


def random_qp(rng, nb_range=(6, 16), structured=None):
    """Random Nyquist-constrained QP with ``N_B`` in ``nb_range``.

    Structured problems come from a random delay window and constellation;
    unstructured ones pair the Nyquist constraints with a random PSD matrix,
    which usually leaves some nonnegativity bounds active at the optimum.
    """
    from isacpulse.design_problem import QpProblem, build_nyquist_system, build_qp, make_weights

    while True:
        N_T = int(rng.choice([4, 8, 16]))
        M = int(rng.integers(6, 24))
        cfg = FrameConfig(L=int(rng.integers(8, 128)), N_T=N_T, L_g=N_T * M,
                          beta=float(rng.uniform(0.05, 1.0)), f_s=1.0)
        if nb_range[0] <= cfg.N_B <= nb_range[1]:
            break
    if structured is None:
        structured = bool(rng.integers(0, 2))
    if structured:
        lo = int(rng.integers(1, cfg.L_g // 4))
        hi = int(rng.integers(lo + 1, cfg.L_g // 2))
        prof = "exponential" if rng.random() < 0.5 else "uniform"
        w = make_weights((lo, hi), profile=prof, gamma=-float(rng.uniform(0.01, 0.1)), f_s=1.0)
        const = make_constellation(str(rng.choice(["QPSK", "16QAM", "64QAM"])))
        return build_qp(cfg, w, const)
    n = cfg.N_B + 1
    B = rng.standard_normal((int(rng.integers(n // 2, 2 * n)), n))
    A, b = build_nyquist_system(cfg)
    return QpProblem(B.T @ B, A, b, cfg)
