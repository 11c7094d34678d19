import itertools

import numpy as np
import pytest

from isacpulse.af_stats import (
    af_moments,
    af_variance,
    alpha,
    alpha0,
    alpha_tilde,
    asymptotic_sacf,
    doppler_sum,
    expected_af,
    expected_saf,
    first_sidelobe,
    normalized_sacf,
    symbol_lags,
    wssus_output_power,
)
from isacpulse.design_problem import make_weights
from isacpulse.signal_core import FrameConfig, Pulse, discrete_af, esd_to_pulse, make_constellation, make_rrc_esd
from conftest import DESIGN, naive_af, random_pulse

ENUM = FrameConfig(L=3, N_T=4, L_g=16, beta=0.3, f_s=1.0)


def _exact_moments(pulse, cfg, const, u, v):
    """Mean, variance and mean square of chi(u, v) by enumerating every symbol sequence."""
    g = pulse.samples
    vals = []
    for sym in itertools.product(const.points, repeat=cfg.L):
        s = np.zeros(cfg.L * cfg.N_T + cfg.L_g - 1, dtype=complex)
        for n, a in enumerate(sym):
            s[n * cfg.N_T: n * cfg.N_T + cfg.L_g] += a * g
        vals.append(naive_af(s, u, v, cfg.K))
    vals = np.array(vals)
    m = vals.mean()
    return m, np.mean(np.abs(vals - m) ** 2), np.mean(np.abs(vals) ** 2)


@pytest.mark.parametrize("name", ["QPSK", "16QAM"])
@pytest.mark.parametrize("u,v", [(0, 0), (1, 0), (4, 0), (-5, 3), (9, 1), (0, 4), (15, 7)])
def test_closed_forms_match_exhaustive_enumeration(name, u, v):
    const = make_constellation(name)
    cfg = ENUM if name == "QPSK" else FrameConfig(L=2, N_T=4, L_g=16, beta=0.3, f_s=1.0)
    p = random_pulse(np.random.default_rng(7), cfg.L_g)
    m, var, sq = _exact_moments(p, cfg, const, u, v)
    assert expected_af(p, u, v, cfg) == pytest.approx(m, abs=1e-12)
    assert af_variance(p, u, v, cfg, const) == pytest.approx(var, rel=1e-10, abs=1e-12)
    assert expected_saf(p, u, v, cfg, const) == pytest.approx(sq, rel=1e-10, abs=1e-12)


def test_weights_at_design_point(qam16):
    assert alpha0(DESIGN, qam16) == pytest.approx(65617.92)
    assert alpha(0, 0, DESIGN, qam16) == pytest.approx(65617.92)
    assert alpha(3, 0, DESIGN, qam16) == 253.0
    assert alpha(256, 0, DESIGN, qam16) == 0.0
    assert alpha_tilde(0, DESIGN, qam16) == pytest.approx(256 * 0.32)
    assert alpha_tilde(-2, DESIGN, qam16) == 254.0


@pytest.mark.parametrize("v", [0, 1, 7, 16, 100, -3])
def test_doppler_sum_matches_direct_sum(v):
    n = np.arange(DESIGN.L)
    ref = np.sum(np.exp(2j * np.pi * n * v * DESIGN.N_T / DESIGN.K))
    assert doppler_sum(DESIGN, v) == pytest.approx(ref, abs=1e-9)


def test_symbol_lags_cover_pulse_overlap():
    n = symbol_lags(5, DESIGN)
    assert np.all(np.abs(5 + n * DESIGN.N_T) < DESIGN.L_g)
    allowed = [k for k in range(-300, 300) if abs(k) < DESIGN.L and abs(5 + k * DESIGN.N_T) < DESIGN.L_g]
    assert n.tolist() == allowed


def test_mean_square_decomposes_into_mean_and_variance(rng, qam16):
    cfg = FrameConfig(L=10, N_T=4, L_g=32, beta=0.3)
    p = random_pulse(rng, cfg.L_g)
    mom = af_moments(p, cfg, qam16, np.arange(-8, 9), np.arange(0, 32, 5))
    np.testing.assert_allclose(mom.expected_saf, np.abs(mom.mean) ** 2 + mom.variance, rtol=1e-10, atol=1e-13)
    for u, v in [(-8, 0), (3, 5), (8, 30)]:
        i, j = mom.index(u, v)
        assert mom.expected_saf[i, j] == pytest.approx(expected_saf(p, u, v, cfg, qam16), rel=1e-12)
    with pytest.raises(KeyError):
        mom.index(100, 0)


def test_ideal_nyquist_pulse_variance_at_origin(qam16):
    # a rectangular pulse one symbol long has no overlap between symbols
    cfg = FrameConfig(L=20, N_T=4, L_g=16, beta=0.3)
    g = np.zeros(cfg.L_g)
    g[: cfg.N_T] = 1.0
    p = Pulse(g).normalized()
    assert af_variance(p, 0, 0, cfg, qam16) == pytest.approx(cfg.L * (qam16.kurtosis - 1.0))
    assert abs(expected_af(p, 0, 0, cfg)) == pytest.approx(cfg.L)


def test_normalized_sacf_tends_to_pulse_acf(rng, qam16):
    p = random_pulse(rng, 32, complex_=False)
    errs = []
    for L in (16, 64, 256, 1024):
        cfg = FrameConfig(L=L, N_T=4, L_g=32, beta=0.3)
        s = normalized_sacf(p, cfg, qam16, max_delay=15)
        ref = np.array([asymptotic_sacf(p, u) for u in range(16)])
        errs.append(np.max(np.abs(s - ref)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # the deviation decays like 1/L: 64x more symbols, at least 32x smaller
    assert errs[-1] < errs[0] / 32


def test_asymptotic_sacf_is_squared_acf(rng):
    p = random_pulse(rng, 16)
    assert asymptotic_sacf(p, 3) == pytest.approx(abs(naive_af(p.samples, 3, 0, 16)) ** 2)
    with pytest.raises(ValueError):
        asymptotic_sacf(p, 17)


def test_rrc_first_sidelobe_at_design_point(qam16):
    sacf = normalized_sacf(esd_to_pulse(make_rrc_esd(DESIGN)), DESIGN, qam16)
    delay, level = first_sidelobe(sacf)
    assert delay == 22
    assert level == pytest.approx(-14.39, abs=0.01)
    with pytest.raises(ValueError):
        first_sidelobe(np.linspace(1, 0, 10))


def test_wssus_output_power_is_weighted_sum(rng, qam16):
    cfg = FrameConfig(L=12, N_T=4, L_g=32, beta=0.3)
    p = random_pulse(rng, cfg.L_g)
    w = make_weights((2, 5), (0, 1), "exponential", gamma=-0.3, f_s=1.0, sigma_T=2.0)
    mom = af_moments(p, cfg, qam16, np.arange(0, 6), np.arange(0, 2))
    ref = 2.0 * expected_saf(p, 0, 0, cfg, qam16)
    for (u, v), s in zip(w.theta, w.sigma_c):
        ref += s * expected_saf(p, int(u), int(v), cfg, qam16) * 0.5
    assert wssus_output_power(mom, w, cell_area=0.5) == pytest.approx(ref, rel=1e-12)
    small = af_moments(p, cfg, qam16, np.arange(0, 3), [0])
    with pytest.raises(ValueError):
        wssus_output_power(small, w)


def test_invalid_delay_bins_raise(rng, qam16):
    p = random_pulse(rng, DESIGN.L_g)
    with pytest.raises(ValueError):
        expected_af(p, DESIGN.L_g + 1, 0, DESIGN)
    with pytest.raises(ValueError):
        af_moments(p, DESIGN, qam16, [0, 300])
    with pytest.raises(ValueError):
        af_variance(Pulse(np.ones(3)), 0, 0, DESIGN, qam16)


def test_expected_af_is_pulse_af_times_doppler_sum(rng):
    p = random_pulse(rng, DESIGN.L_g)
    assert expected_af(p, 7, 3, DESIGN) == pytest.approx(discrete_af(p, 7, 3, DESIGN) * doppler_sum(DESIGN, 3))
