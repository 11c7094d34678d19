"""Monte-Carlo validation: frames, empirical AF statistics, clutter, RD maps, ranging.

All randomness comes from explicit integer seeds.  Experiments that repeat a
trial many times derive one child seed per trial with
``numpy.random.SeedSequence(master).spawn(n)``, so results do not depend on
the order in which trials are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from . import kernels
from .af_stats import alpha0
from .signal_core import SPEED_OF_LIGHT, Constellation, FrameConfig, Pulse, _check_len


def child_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(int(n))


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolFrame:
    symbols: np.ndarray
    seed: int | None = None
    constellation: Constellation | None = None

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.complex128).ravel()
        if self.constellation is not None:
            d = np.min(np.abs(s[:, None] - self.constellation.points[None, :]), axis=1)
            if np.any(d > 1e-12):
                raise ValueError("frame contains symbols outside the declared constellation")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    def __len__(self) -> int:
        return self.symbols.size


def _draw(constellation: Constellation, L: int, rng: np.random.Generator) -> np.ndarray:
    return constellation.points[rng.integers(0, constellation.points.size, size=L)]


def draw_frame(constellation: Constellation, L: int, seed: int) -> SymbolFrame:
    rng = np.random.default_rng(seed)
    return SymbolFrame(_draw(constellation, L, rng), seed, constellation)


def draw_symbol_matrix(constellation: Constellation, L: int, n_frames: int, seed: int) -> np.ndarray:
    """``(n_frames, L)`` symbols, frame ``i`` drawn from child seed ``i`` of ``seed``."""
    out = np.empty((n_frames, L), dtype=np.complex128)
    for i, ss in enumerate(child_seeds(seed, n_frames)):
        out[i] = _draw(constellation, L, np.random.default_rng(ss))
    return out


def synthesize_frame(frame: SymbolFrame | np.ndarray, pulse: Pulse, config: FrameConfig) -> np.ndarray:
    """``s[k] = sum_n s_n g[k - n N_T]``, length ``L N_T + L_g - 1``."""
    _check_len(pulse, config)
    sym = frame.symbols if isinstance(frame, SymbolFrame) else np.asarray(frame, dtype=complex)
    up = np.zeros(sym.size * config.N_T, dtype=np.complex128)
    up[:: config.N_T] = sym
    return np.convolve(up, pulse.samples)


def synthesize_frames(symbols: np.ndarray, pulse: Pulse, config: FrameConfig) -> np.ndarray:
    """Row-wise :func:`synthesize_frame` for a ``(n_frames, L)`` symbol matrix."""
    _check_len(pulse, config)
    symbols = np.atleast_2d(symbols)
    up = np.zeros((symbols.shape[0], symbols.shape[1] * config.N_T), dtype=np.complex128)
    up[:, :: config.N_T] = symbols
    return scipy.signal.fftconvolve(up, pulse.samples[None, :], axes=1)


def frame_af(samples: np.ndarray, delays, dopplers, config: FrameConfig) -> np.ndarray:
    """Discrete AF of one or more frames on the grid ``delays x dopplers``.

    Returns shape ``(n_u, n_v)`` for a 1-D input and ``(n_frames, n_u, n_v)``
    for a 2-D input.
    """
    x = np.asarray(samples)
    uu, vv = np.meshgrid(np.asarray(delays, int), np.asarray(dopplers, int), indexing="ij")
    vals = kernels.frame_products(np.atleast_2d(x), uu.ravel(), vv.ravel(), config.K)
    vals = vals.reshape((-1,) + uu.shape)
    return vals[0] if x.ndim == 1 else vals


# ---------------------------------------------------------------------------
# empirical AF statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChiSamples:
    """Per-frame frame-AF values ``chi`` (and the self-term ``chi_s``) on a grid."""

    delays: np.ndarray
    dopplers: np.ndarray
    chi: np.ndarray          # (n_frames, n_u, n_v)
    chi_s: np.ndarray        # (n_frames, n_u, n_v)

    @property
    def chi_c(self) -> np.ndarray:
        return self.chi - self.chi_s

    @property
    def n_frames(self) -> int:
        return self.chi.shape[0]


def simulate_chi(pulse: Pulse, config: FrameConfig, constellation: Constellation, n_frames: int,
                 delays, dopplers=(0,), seed: int = 0, batch: int = 512) -> ChiSamples:
    """Draw ``n_frames`` random frames and evaluate their AF on the grid.

    The self term ``chi_s = sum_n |s_n|^2 exp(2j pi v n N_T / K) psi(u, v)`` is
    the sum of the individual symbol pulses' AFs; ``chi - chi_s`` is the
    cross term.
    """
    if n_frames < 1:
        raise ValueError("need at least one frame")
    _check_len(pulse, config)
    delays = np.asarray(delays, dtype=np.int64).ravel()
    dopplers = np.asarray(dopplers, dtype=np.int64).ravel()
    sym = draw_symbol_matrix(constellation, config.L, n_frames, seed)
    chi = np.empty((n_frames, delays.size, dopplers.size), dtype=np.complex128)
    for lo in range(0, n_frames, batch):
        frames = synthesize_frames(sym[lo: lo + batch], pulse, config)
        chi[lo: lo + batch] = frame_af(frames, delays, dopplers, config)
    uu, vv = np.meshgrid(delays, dopplers, indexing="ij")
    g = pulse.samples
    psi = kernels.lag_products(g, g, uu.ravel(), vv.ravel(), config.K).reshape(uu.shape)
    n = np.arange(config.L)
    idx = (np.outer(n * config.N_T, np.mod(dopplers, config.K))) % config.K
    ph = kernels.roots_of_unity(config.K)[idx]                      # (L, n_v)
    chi_s = (np.abs(sym) ** 2 @ ph)[:, None, :] * psi[None, :, :]
    return ChiSamples(delays, dopplers, chi, chi_s)


@dataclass(frozen=True)
class EmpiricalSaf:
    delays: np.ndarray
    dopplers: np.ndarray
    mean: np.ndarray      # normalised mean of |chi|^2
    stderr: np.ndarray    # its standard error
    n_frames: int


def empirical_saf(pulse: Pulse, config: FrameConfig, constellation: Constellation, n_frames: int,
                  delays, dopplers=(0,), seed: int = 0) -> EmpiricalSaf:
    """Monte-Carlo mean of ``|chi(u, v)|^2 / alpha_0(0)`` with its standard error."""
    cs = simulate_chi(pulse, config, constellation, n_frames, delays, dopplers, seed)
    a0 = alpha0(config, constellation)
    sq = np.abs(cs.chi) ** 2 / a0
    se = sq.std(axis=0, ddof=1) / math.sqrt(n_frames) if n_frames > 1 else np.full(sq.shape[1:], np.inf)
    return EmpiricalSaf(cs.delays, cs.dopplers, sq.mean(axis=0), se, n_frames)


# ---------------------------------------------------------------------------
# WSSUS clutter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScatteringField:
    """Complex gains ``a(lambda, mu)`` on delay/Doppler bins."""

    delays: np.ndarray
    dopplers: np.ndarray
    gains: np.ndarray


def wssus_draw(scattering, seed: int, cell_area: float = 1.0,
               include_target: bool = True) -> ScatteringField:
    """Independent ``CN(0, sigma * cell_area)`` gain per bin of ``scattering``.

    The point target at ``(0, 0)`` (variance ``sigma_T``) is appended when
    ``include_target`` is set and ``sigma_T > 0``.
    """
    rng = np.random.default_rng(seed)
    theta = np.asarray(scattering.theta, dtype=np.int64).reshape(-1, 2)
    var = np.asarray(scattering.sigma_c, dtype=float) * cell_area
    if include_target and scattering.sigma_T > 0:
        theta = np.vstack([[0, 0], theta])
        var = np.concatenate([[scattering.sigma_T], var])
    z = (rng.standard_normal(var.size) + 1j * rng.standard_normal(var.size)) * np.sqrt(var / 2)
    return ScatteringField(theta[:, 0].copy(), theta[:, 1].copy(), z)


def apply_channel(samples: np.ndarray, field_: ScatteringField, config: FrameConfig) -> np.ndarray:
    """``x[k] = sum a(l, m) s[k - l] exp(2j pi m k / K)`` on integer bins ``l >= 0``."""
    s = np.asarray(samples, dtype=np.complex128)
    if np.any(field_.delays < 0):
        raise ValueError("channel delays must be nonnegative")
    n_out = s.size + (int(field_.delays.max()) if field_.delays.size else 0)
    x = np.zeros(n_out, dtype=np.complex128)
    roots = kernels.roots_of_unity(config.K)
    k = np.arange(n_out)
    for lam, mu, a in zip(field_.delays, field_.dopplers, field_.gains):
        if a == 0:
            continue
        contrib = np.zeros(n_out, dtype=np.complex128)
        contrib[lam: lam + s.size] = s
        x += a * contrib * roots[(int(mu) * k) % config.K]
    return x


def matched_filter_output(received: np.ndarray, reference: np.ndarray, u: int, v: int,
                          config: FrameConfig) -> complex:
    """``sum_k conj(ref[k - u]) x[k] exp(-2j pi v k / K)``."""
    fold = kernels.fold_delay_products(reference, received, [int(u)], config.K)[0]
    return complex(np.sum(fold * np.conj(kernels.roots_of_unity(config.K))[
        (int(v) * np.arange(config.K)) % config.K]))


def wssus_power_mc(pulse: Pulse, config: FrameConfig, constellation: Constellation, scattering,
                   n_draws: int, seed: int = 0, cell_area: float = 1.0) -> tuple[float, float]:
    """Sample mean and standard error of ``|X(0, 0)|^2`` over channel and symbol draws."""
    vals = np.empty(n_draws)
    for i, ss in enumerate(child_seeds(seed, n_draws)):
        s_seed, c_seed = ss.spawn(2)
        sym = _draw(constellation, config.L, np.random.default_rng(s_seed))
        s = synthesize_frame(sym, pulse, config)
        fld = wssus_draw(scattering, np.random.default_rng(c_seed).integers(2**63), cell_area)
        x = apply_channel(s, fld, config)
        vals[i] = abs(np.vdot(s, x[: s.size])) ** 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_draws))


# ---------------------------------------------------------------------------
# targets, echoes and noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    range_m: float
    doppler_bin: int = 0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("reflection coefficients must be nonnegative")
        if self.range_m < 0:
            raise ValueError("target range must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    targets: tuple[Target, ...]
    snr_db: float = math.inf
    clutter: object | None = None

    def validate(self, config: FrameConfig) -> None:
        window = config.L_g * config.T_s * SPEED_OF_LIGHT / 2
        for t in self.targets:
            if t.range_m >= window:
                raise ValueError(f"target at {t.range_m} m outside the unambiguous window {window:.2f} m")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        tg = tuple(Target(float(t["range_m"]), int(t.get("doppler_bin", 0)), float(t.get("amplitude", 1.0)))
                   for t in d["targets"])
        snr = d.get("snr_db", None)
        return cls(tg, math.inf if snr is None else float(snr))

    def to_dict(self) -> dict:
        return {"targets": [{"range_m": t.range_m, "doppler_bin": t.doppler_bin,
                             "amplitude": t.amplitude} for t in self.targets],
                "snr_db": None if math.isinf(self.snr_db) else self.snr_db}


def range_to_delay(r: float, config: FrameConfig) -> float:
    """Fractional two-way delay in samples for a range in metres."""
    return 2.0 * r * config.f_s / SPEED_OF_LIGHT


def delay_signal(x: np.ndarray, delay: float, n_out: int) -> np.ndarray:
    """Delay ``x`` by a possibly fractional number of samples (FFT phase ramp).

    The signal is zero padded to a power of two of at least ``n_out + len(x)``
    samples, so integer delays reproduce an exact shift.
    """
    n = 1 << int(math.ceil(math.log2(max(n_out, x.size) + x.size + 1)))
    X = np.fft.fft(x, n)
    f = np.fft.fftfreq(n)
    if float(delay).is_integer():
        y = np.zeros(n, dtype=np.complex128)
        d = int(delay)
        y[d: d + x.size] = x
        return y[:n_out]
    return np.fft.ifft(X * np.exp(-2j * np.pi * f * delay))[:n_out]


def echo(samples: np.ndarray, targets, config: FrameConfig, n_out: int | None = None) -> np.ndarray:
    """Noiseless sum of delayed, Doppler-shifted, scaled copies of ``samples``."""
    s = np.asarray(samples, dtype=np.complex128)
    if n_out is None:
        n_out = s.size + config.L_g
    k = np.arange(n_out)
    x = np.zeros(n_out, dtype=np.complex128)
    for t in targets:
        d = range_to_delay(t.range_m, config)
        ph = np.exp(2j * np.pi * (t.doppler_bin * k % config.K) / config.K)
        x += t.amplitude * delay_signal(s, d, n_out) * ph
    return x


def add_awgn(samples: np.ndarray, snr_db: float, seed, reference_power: float | None = None) -> np.ndarray:
    """Add circular complex Gaussian noise at ``snr_db`` per sample.

    The noise power is ``P / 10^(snr_db/10)`` with ``P`` the mean power of
    ``samples`` (or ``reference_power``).  ``snr_db = inf`` adds nothing.
    """
    x = np.asarray(samples, dtype=np.complex128)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = float(np.mean(np.abs(x) ** 2)) if reference_power is None else reference_power
    npow = p / 10 ** (snr_db / 10)
    noise = (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)) * math.sqrt(npow / 2)
    return x + noise


# ---------------------------------------------------------------------------
# range-Doppler processing
# ---------------------------------------------------------------------------


def pulse_peak_offset(pulse: Pulse) -> int:
    return int(np.argmax(np.abs(pulse.samples)))


@dataclass(frozen=True)
class RdMap:
    """Magnitude-squared delay-Doppler correlation.

    ``delays`` are in samples (symbol-only maps use multiples of ``N_T``).
    """

    delays: np.ndarray
    dopplers: np.ndarray
    power: np.ndarray
    mode: str = "full"

    def rows(self):
        for i, u in enumerate(self.delays):
            for j, v in enumerate(self.dopplers):
                yield (int(u), int(v), float(self.power[i, j]))


def range_doppler_map(received: np.ndarray, pulse: Pulse, frame: SymbolFrame, config: FrameConfig,
                      delays=None, mode: str = "full") -> RdMap:
    """Correlate ``received`` against delay/Doppler-shifted copies of the transmitted frame.

    ``mode="full"`` uses every sample and the synthesised frame as reference.
    ``mode="symbol"`` keeps only the symbol-rate samples at the pulse peaks and
    correlates them with the bare symbol sequence; its delay axis is the
    symbol grid ``d * N_T`` and its Doppler axis the unambiguous bins
    ``0..K/N_T - 1``.
    """
    x = np.asarray(received, dtype=np.complex128)
    K = config.K
    if mode == "full":
        ref = synthesize_frame(frame, pulse, config)
        if x.size < ref.size:
            raise ValueError("received signal is shorter than the transmitted frame")
        if delays is None:
            delays = np.arange(0, x.size - ref.size + 1)
        delays = np.asarray(delays, dtype=np.int64)
        fold = kernels.fold_delay_products(ref, x, delays, K)
        power = np.abs(np.fft.fft(fold, axis=1)) ** 2
        return RdMap(delays, np.arange(K), power, "full")
    if mode != "symbol":
        raise ValueError(f"unknown mode {mode!r}")
    c = pulse_peak_offset(pulse)
    sym = frame.symbols
    n_sym = (x.size - c - 1) // config.N_T + 1
    t_idx = c + config.N_T * np.arange(n_sym)
    y = x[t_idx]
    if delays is None:
        delays = np.arange(0, n_sym - sym.size + 1) * config.N_T
    delays = np.asarray(delays, dtype=np.int64)
    if np.any(delays % config.N_T):
        raise ValueError("symbol-only delays must be multiples of N_T")
    # symbol-rate sampling aliases Doppler with period K / N_T bins
    dops = np.arange(config.M)
    ph = np.conj(kernels.roots_of_unity(K))[np.outer(t_idx, dops) % K]   # (n_sym, M)
    power = np.zeros((delays.size, dops.size))
    for i, dd in enumerate(delays // config.N_T):
        z = np.zeros(n_sym, dtype=np.complex128)
        lo, hi = max(0, dd), min(n_sym, dd + sym.size)
        if hi > lo:
            z[lo:hi] = np.conj(sym[lo - dd: hi - dd]) * y[lo:hi]
        power[i] = np.abs(z @ ph) ** 2
    return RdMap(delays, dops, power, "symbol")


def correlate_zero_doppler(received: np.ndarray, reference: np.ndarray, max_delay: int) -> np.ndarray:
    """``|sum_k conj(ref[k - u]) x[k]|^2`` for ``u = 0..max_delay`` (FFT based)."""
    n = 1 << int(math.ceil(math.log2(received.size + reference.size)))
    c = np.fft.ifft(np.fft.fft(received, n) * np.conj(np.fft.fft(reference, n)))
    return np.abs(c[: max_delay + 1]) ** 2


@dataclass(frozen=True)
class Peak:
    index: int
    doppler_index: int
    value: float
    position: float   # parabolically refined delay (same units as the axis)


def _parabolic(y_m, y_0, y_p) -> float:
    den = y_m - 2 * y_0 + y_p
    return 0.0 if den == 0 else 0.5 * (y_m - y_p) / den


def find_peaks(power: np.ndarray, n_peaks: int, guard: int, axis_values=None,
               rel_threshold_db: float | None = None) -> list[Peak]:
    """Greedy picking of the strongest local maxima separated by more than ``guard``.

    ``power`` is a delay profile (1-D) or a delay-Doppler map (2-D, Doppler
    wrapping).  Local maxima are taken over the 3 (or 3x3) neighbourhood;
    a candidate within ``guard`` delay cells (and one Doppler cell) of an
    accepted peak is skipped.  Positions are refined by a 3-point parabola
    along delay.  With ``rel_threshold_db`` set, maxima more than that many dB
    below the strongest one are not reported.
    """
    pw = np.asarray(power, dtype=float)
    if pw.ndim == 1:
        pw = pw[:, None]
    n_u, n_v = pw.shape
    if axis_values is None:
        axis_values = np.arange(n_u)
    axis_values = np.asarray(axis_values, dtype=float)
    step = float(axis_values[1] - axis_values[0]) if n_u > 1 else 1.0
    left = np.vstack([np.full((1, n_v), -np.inf), pw[:-1]])
    right = np.vstack([pw[1:], np.full((1, n_v), -np.inf)])
    is_max = (pw > left) & (pw >= right)
    if n_u > 1:
        # the first cell has no left neighbour; it must rise above its right one
        is_max[0] &= pw[0] > pw[1]
    if n_v > 2:
        is_max &= (pw >= np.roll(pw, 1, axis=1)) & (pw >= np.roll(pw, -1, axis=1))
    cand = np.argwhere(is_max)
    order = np.argsort(-pw[is_max], kind="stable")
    peaks: list[Peak] = []
    floor = -np.inf
    if rel_threshold_db is not None and cand.size:
        floor = pw.max() * 10 ** (-rel_threshold_db / 10)
    for i, j in cand[order]:
        if pw[i, j] < floor:
            break
        if any(abs(i - p.index) <= guard and min(abs(j - p.doppler_index), n_v - abs(j - p.doppler_index)) <= 1
               for p in peaks):
            continue
        off = 0.0
        if 0 < i < n_u - 1:
            off = _parabolic(pw[i - 1, j], pw[i, j], pw[i + 1, j])
        peaks.append(Peak(int(i), int(j), float(pw[i, j]), float(axis_values[i] + off * step)))
        if len(peaks) == n_peaks:
            break
    return peaks


def mainlobe_halfwidth(pulse: Pulse, config: FrameConfig) -> int:
    """Delay of the first local minimum of the pulse's |ACF| (null-to-peak width)."""
    g = pulse.samples
    lags = np.arange(0, config.L_g)
    a = np.abs(kernels.lag_products(g, g, lags, np.zeros_like(lags), config.K))
    for k in range(1, a.size - 1):
        if a[k] <= a[k - 1] and a[k] <= a[k + 1]:
            return k
    return config.N_T


def resolved_targets(peaks: list[Peak], true_delays, tol: float) -> np.ndarray:
    """For each true delay, whether some detected peak lies within ``tol``."""
    pos = np.array([p.position for p in peaks])
    return np.array([pos.size > 0 and bool(np.min(np.abs(pos - d)) <= tol) for d in true_delays])


# ---------------------------------------------------------------------------
# ranging RMSE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RangingSetup:
    """Two-target ranging sweep: one uniform interval and amplitude per target."""

    intervals: tuple[tuple[float, float], ...] = ((18.0, 27.0), (32.0, 41.0))
    amplitudes: tuple[float, ...] = (1.0, 0.8)
    constellation: str = "16QAM"

    def __post_init__(self):
        if len(self.intervals) != len(self.amplitudes):
            raise ValueError("one amplitude per interval")
        for lo, hi in self.intervals:
            if not 0 <= lo <= hi:
                raise ValueError("invalid range interval")


def estimate_ranges(received: np.ndarray, pulse: Pulse, frame: SymbolFrame, config: FrameConfig,
                    n_targets: int, max_delay: int, mode: str = "full",
                    guard: int | None = None, min_delay: int = 0,
                    rel_threshold_db: float = 10.0) -> np.ndarray:
    """Range estimates (metres, sorted) from the strongest separated zero-Doppler peaks.

    Peaks are searched on delays ``min_delay..max_delay`` (samples) and must
    lie within ``rel_threshold_db`` of the strongest one.  Targets left
    without a peak are assigned the strongest peak's range.
    """
    if mode == "full":
        ref = synthesize_frame(frame, pulse, config)
        prof = correlate_zero_doppler(received, ref, max_delay)
        axis = np.arange(max_delay + 1, dtype=float)
        g = mainlobe_halfwidth(pulse, config) if guard is None else guard
    else:
        m = range_doppler_map(received, pulse, frame, config,
                              delays=np.arange(0, max_delay // config.N_T + 1) * config.N_T,
                              mode="symbol")
        prof = m.power[:, 0]
        axis = m.delays.astype(float)
        g = 0 if guard is None else guard
    keep = axis >= min_delay
    peaks = find_peaks(prof[keep], n_targets, g, axis[keep], rel_threshold_db)
    pos = [p.position for p in peaks]
    while len(pos) < n_targets:
        pos.append(pos[0] if pos else 0.0)
    return np.sort(np.array(pos)) * SPEED_OF_LIGHT / (2 * config.f_s)


def ranging_rmse(pulse: Pulse, config: FrameConfig, snr_db, trials: int, seed: int = 0,
                 setup: RangingSetup = RangingSetup(), mode: str = "full") -> np.ndarray:
    """RMSE (metres) of two-target range estimates for each SNR in ``snr_db``.

    Each trial draws target ranges uniformly in ``setup.intervals``, a fresh
    symbol frame and noise; trial seeds are shared across SNRs and modes so
    curves are directly comparable.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    from .signal_core import make_constellation

    const = make_constellation(setup.constellation)
    snrs = np.atleast_1d(np.asarray(snr_db, dtype=float))
    # search window: hull of the prior intervals padded by one symbol duration
    max_delay = int(math.ceil(range_to_delay(max(hi for _, hi in setup.intervals), config))) + config.N_T
    min_delay = max(0, int(math.floor(range_to_delay(min(lo for lo, _ in setup.intervals), config))) - config.N_T)
    err2 = np.zeros(snrs.size)
    count = 0
    for ss in child_seeds(seed, trials):
        sym_seed, rng_seed, noise_seed = ss.spawn(3)
        rng = np.random.default_rng(rng_seed)
        ranges = np.array([rng.uniform(lo, hi) for lo, hi in setup.intervals])
        frame = SymbolFrame(_draw(const, config.L, np.random.default_rng(sym_seed)))
        s = synthesize_frame(frame, pulse, config)
        x0 = echo(s, [Target(r, 0, a) for r, a in zip(ranges, setup.amplitudes)], config)
        p0 = float(np.mean(np.abs(x0) ** 2))
        truth = np.sort(ranges)
        noise_rngs = [np.random.default_rng(c) for c in noise_seed.spawn(snrs.size)]
        for i, snr in enumerate(snrs):
            x = add_awgn(x0, snr, noise_rngs[i], reference_power=p0)
            est = estimate_ranges(x, pulse, frame, config, len(ranges), max_delay, mode,
                                  min_delay=min_delay)
            err2[i] += float(np.sum((est - truth) ** 2))
        count += len(ranges)
    return np.sqrt(err2 / count)
