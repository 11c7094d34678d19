"""Closed-form moments of the frame ambiguity function under random symbols.

For a frame ``s[k] = sum_n s_n g[k - n N_T]`` with i.i.d. unit-energy,
circularly symmetric symbols of kurtosis ``mu4`` the discrete frame AF

    chi(u, v) = sum_k conj(s[k]) s[k-u] exp(2j pi v k / K)

has

    E chi       = psi(u, v) * sum_{n<L} exp(2j pi n v N_T / K)
    Var chi     = sum_{|n|<L} atilde_n |psi(u + n N_T, v)|^2
    E |chi|^2   = sum_{|n|<L} alpha_n(v) |psi(u + n N_T, v)|^2

with ``atilde_0 = L(mu4 - 1)``, ``atilde_n = L - |n|`` and
``alpha_0(v) = L(mu4 - 1) + |sum_m exp(2j pi m v N_T / K)|^2``,
``alpha_n(v) = L - |n|`` otherwise.  ``psi`` is the pulse AF.  Reported
squared-AF values are normalised by ``alpha_0(0) = L(mu4 - 1) + L^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .signal_core import Constellation, FrameConfig, Pulse, _check_len


def doppler_sum(config: FrameConfig, v: int) -> complex:
    """``sum_{n=0}^{L-1} exp(2j pi n v N_T / K)``, evaluated with exact phase indices."""
    n = np.arange(config.L, dtype=np.int64)
    idx = (n * (int(v) % config.K) * config.N_T) % config.K
    return complex(np.sum(kernels.roots_of_unity(config.K)[idx]))


def alpha(n: int, v: int, config: FrameConfig, constellation: Constellation) -> float:
    """Weight ``alpha_n(v)`` of the expected squared AF."""
    if abs(n) >= config.L:
        return 0.0
    if n == 0:
        return config.L * (constellation.kurtosis - 1.0) + abs(doppler_sum(config, v)) ** 2
    return float(config.L - abs(n))


def alpha_tilde(n: int, config: FrameConfig, constellation: Constellation) -> float:
    """Weight of the AF variance (Doppler independent)."""
    if abs(n) >= config.L:
        return 0.0
    if n == 0:
        return config.L * (constellation.kurtosis - 1.0)
    return float(config.L - abs(n))


def alpha0(config: FrameConfig, constellation: Constellation) -> float:
    """Normaliser ``alpha_0(0) = L(mu4 - 1) + L^2``."""
    return config.L * (constellation.kurtosis - 1.0) + float(config.L) ** 2


def symbol_lags(u: int, config: FrameConfig, limit: int | None = None) -> np.ndarray:
    """Symbol offsets ``n`` with ``|n| < L`` and ``|u + n N_T| < limit`` (default ``L_g``)."""
    lim = config.L_g if limit is None else limit
    lo = -((lim - 1 + u) // config.N_T)
    hi = (lim - 1 - u) // config.N_T
    n = np.arange(lo, hi + 1)
    n = n[(np.abs(n) < config.L) & (np.abs(u + n * config.N_T) < lim)]
    return n


def _psi_at(pulse: Pulse, lags, v: int, config: FrameConfig) -> np.ndarray:
    lags = np.asarray(lags, dtype=np.int64)
    g = pulse.samples
    return kernels.lag_products(g, g, lags, np.full(lags.shape, int(v)), config.K)


def _check_bins(u, config):
    if int(u) != u or abs(u) > config.L_g:
        raise ValueError(f"invalid delay bin u={u}: need |u| <= L_g = {config.L_g}")


def expected_af(pulse: Pulse, u: int, v: int, config: FrameConfig) -> complex:
    _check_len(pulse, config)
    _check_bins(u, config)
    return complex(_psi_at(pulse, [u], v, config)[0] * doppler_sum(config, v))


def af_variance(pulse: Pulse, u: int, v: int, config: FrameConfig,
                constellation: Constellation) -> float:
    _check_len(pulse, config)
    _check_bins(u, config)
    n = symbol_lags(u, config)
    p = _psi_at(pulse, u + n * config.N_T, v, config)
    wts = np.array([alpha_tilde(int(k), config, constellation) for k in n])
    return float(np.sum(wts * np.abs(p) ** 2))


def expected_saf(pulse: Pulse, u: int, v: int, config: FrameConfig,
                 constellation: Constellation) -> float:
    _check_len(pulse, config)
    _check_bins(u, config)
    n = symbol_lags(u, config)
    p = _psi_at(pulse, u + n * config.N_T, v, config)
    wts = np.array([alpha(int(k), v, config, constellation) for k in n])
    return float(np.sum(wts * np.abs(p) ** 2))


def asymptotic_sacf(pulse: Pulse, u: int) -> float:
    """Large-``L`` limit of the normalised expected SACF, ``|psi(u, 0)|^2``."""
    g = pulse.samples
    if int(u) != u or abs(u) > g.size:
        raise ValueError(f"invalid delay bin u={u}")
    val = kernels.lag_products(g, g, [int(u)], [0], g.size)[0]
    return float(abs(val) ** 2)


@dataclass(frozen=True)
class AfMoments:
    """AF moments on the grid ``delays x dopplers`` (arrays of shape (n_u, n_v))."""

    delays: np.ndarray
    dopplers: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    expected_saf: np.ndarray
    normalizer: float

    def normalized_saf(self) -> np.ndarray:
        return self.expected_saf / self.normalizer

    def index(self, u: int, v: int) -> tuple[int, int]:
        iu = np.flatnonzero(self.delays == u)
        iv = np.flatnonzero(self.dopplers == v)
        if iu.size == 0 or iv.size == 0:
            raise KeyError((u, v))
        return int(iu[0]), int(iv[0])

    def rows(self):
        """Yield ``(u, v, mean_re, mean_im, variance, expected_saf)`` in grid order."""
        for i, u in enumerate(self.delays):
            for j, v in enumerate(self.dopplers):
                m = self.mean[i, j]
                yield (int(u), int(v), m.real, m.imag, self.variance[i, j], self.expected_saf[i, j])

    COLUMNS = ("delay_bin", "doppler_bin", "mean_re", "mean_im", "variance", "expected_saf")


def af_moments(pulse: Pulse, config: FrameConfig, constellation: Constellation,
               delays, dopplers=(0,)) -> AfMoments:
    """Evaluate mean, variance and expected squared AF on a delay-Doppler grid."""
    _check_len(pulse, config)
    delays = np.asarray(delays, dtype=np.int64).ravel()
    dopplers = np.asarray(dopplers, dtype=np.int64).ravel()
    for u in delays:
        _check_bins(u, config)
    Lg, NT = config.L_g, config.N_T
    all_lags = np.arange(-Lg, Lg + 1)
    mean = np.zeros((delays.size, dopplers.size), dtype=complex)
    var = np.zeros((delays.size, dopplers.size))
    saf = np.zeros_like(var)
    for j, v in enumerate(dopplers):
        table = _psi_at(pulse, all_lags, int(v), config)  # index w + L_g
        dsum = doppler_sum(config, int(v))
        a0v = config.L * (constellation.kurtosis - 1.0) + abs(dsum) ** 2
        for i, u in enumerate(delays):
            n = symbol_lags(int(u), config)
            p2 = np.abs(table[u + n * NT + Lg]) ** 2
            wt = np.where(n == 0, 0.0, config.L - np.abs(n)).astype(float)
            base = float(np.sum(wt * p2))
            p0 = p2[n == 0].sum()
            mean[i, j] = table[u + Lg] * dsum
            var[i, j] = base + config.L * (constellation.kurtosis - 1.0) * p0
            saf[i, j] = base + a0v * p0
    return AfMoments(delays, dopplers, mean, var, saf, alpha0(config, constellation))


def wssus_output_power(moments: AfMoments, scattering, cell_area: float = 1.0) -> float:
    """Mean power of the matched-filter output at the origin under a WSSUS channel.

    ``scattering`` is any object with ``theta`` (pairs of bins), ``sigma_c``
    and ``sigma_T`` attributes, e.g. :class:`isacpulse.design_problem.DesignWeights`.
    Every scattering bin, and ``(0, 0)`` when ``sigma_T > 0``, must be on the
    moments grid.
    """
    total = 0.0
    try:
        if scattering.sigma_T > 0:
            total += scattering.sigma_T * moments.expected_saf[moments.index(0, 0)]
        for (u, v), s in zip(np.asarray(scattering.theta), np.asarray(scattering.sigma_c)):
            if s == 0:
                continue
            total += s * moments.expected_saf[moments.index(int(u), int(v))] * cell_area
    except KeyError as exc:
        raise ValueError(f"scattering bin {exc.args[0]} is not on the moments grid") from None
    return float(total)


def normalized_sacf(pulse: Pulse, config: FrameConfig, constellation: Constellation,
                    max_delay: int | None = None) -> np.ndarray:
    """Normalised expected SACF on delays ``0..max_delay`` (default ``L_g // 2``)."""
    m = config.L_g // 2 if max_delay is None else max_delay
    mom = af_moments(pulse, config, constellation, np.arange(m + 1), [0])
    return mom.normalized_saf()[:, 0]


def first_sidelobe(sacf: np.ndarray) -> tuple[int, float]:
    """Delay and dB level of the first local maximum after the first local minimum."""
    s = np.asarray(sacf, dtype=float)
    k = 1
    while k < s.size - 1 and not (s[k] <= s[k - 1] and s[k] <= s[k + 1]):
        k += 1
    j = k + 1
    while j < s.size - 1 and not (s[j] >= s[j - 1] and s[j] >= s[j + 1]):
        j += 1
    if j >= s.size - 1:
        raise ValueError("no sidelobe found in the delay window")
    return j, float(10 * np.log10(s[j]))
