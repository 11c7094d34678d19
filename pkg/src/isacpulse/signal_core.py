"""Discrete pulses, constellations, spectra and the discrete ambiguity function.

Conventions used throughout the package:

* one frame carries ``L`` symbols spaced ``N_T`` samples apart;
* a pulse has ``L_g`` samples and the Doppler DFT size is ``K = L_g``;
* the half-spectrum ESD ``omega`` has ``N_B + 1`` bins and is mirrored into a
  length ``L_g`` full spectrum (bin ``n`` and bin ``L_g - n`` carry the same
  value);
* delay shifts are zero padded, never circular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kernels

SPEED_OF_LIGHT = 299_792_458.0
IMAG_TOL = 1e-8


def _round_half_up(x: float) -> int:
    # the small offset absorbs binary representation error at exact halves
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True)
class FrameConfig:
    """Frame and sampling parameters.

    Parameters
    ----------
    L : int
        Number of symbols per frame.
    N_T : int
        Samples per symbol duration (``T = N_T * T_s``).
    L_g : int
        Pulse length in samples, a positive multiple of ``N_T``.
    beta : float
        Nominal roll-off factor in ``[0, 1]``.
    f_s : float
        Sampling rate in Hz.
    """

    L: int = 256
    N_T: int = 16
    L_g: int = 256
    beta: float = 0.3
    f_s: float = 320e6

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        if int(self.N_T) != self.N_T or self.N_T < 2:
            raise ValueError(f"N_T must be an integer >= 2, got {self.N_T}")
        if int(self.L_g) != self.L_g or self.L_g <= 0 or self.L_g % self.N_T:
            raise ValueError(f"L_g must be a positive multiple of N_T, got L_g={self.L_g}, N_T={self.N_T}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.f_s > 0:
            raise ValueError(f"f_s must be positive, got {self.f_s}")
        if 2 * self.N_B + 1 > self.L_g:
            raise ValueError("bandwidth exceeds the DFT grid: need 2*N_B + 1 <= L_g")

    @property
    def K(self) -> int:
        """Doppler DFT size (equal to the pulse length)."""
        return self.L_g

    @property
    def M(self) -> int:
        """Symbol period measured in DFT bins, ``L_g / N_T``."""
        return self.L_g // self.N_T

    @property
    def N_B(self) -> int:
        """Index of the highest in-band frequency bin."""
        return _round_half_up((1.0 + self.beta) * self.L_g / (2 * self.N_T))

    @property
    def effective_beta(self) -> float:
        """Roll-off implied by the rounded band edge ``N_B``."""
        return 2.0 * self.N_T * self.N_B / self.L_g - 1.0

    @property
    def T_s(self) -> float:
        return 1.0 / self.f_s

    @property
    def T(self) -> float:
        return self.N_T / self.f_s

    @property
    def bin_spacing_hz(self) -> float:
        return self.f_s / self.L_g

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConfig":
        return cls(L=int(d["L"]), N_T=int(d["N_T"]), L_g=int(d["L_g"]),
                   beta=float(d["beta"]), f_s=float(d["f_s"]))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pulse:
    """Discrete pulse-shaping filter ``g``.

    ``samples`` is stored as a read-only complex vector; the energy is derived
    from it so the two can never disagree.
    """

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128).ravel()
        if s.size == 0 or not np.all(np.isfinite(s)):
            raise ValueError("pulse samples must be a non-empty finite vector")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def imag_residue(self) -> float:
        return float(np.max(np.abs(self.samples.imag)))

    @property
    def is_real(self) -> bool:
        """True when the imaginary residue is at most 1e-8."""
        return self.imag_residue <= IMAG_TOL

    def real(self) -> np.ndarray:
        """Real part as a float vector; raises if the pulse is not real."""
        if not self.is_real:
            raise ValueError(f"pulse has imaginary residue {self.imag_residue:.3e} > {IMAG_TOL}")
        return self.samples.real.copy()

    def scaled(self, c: complex) -> "Pulse":
        return Pulse(self.samples * c)

    def normalized(self, energy: float = 1.0) -> "Pulse":
        e = self.energy
        if e == 0:
            raise ValueError("cannot normalise a zero pulse")
        return Pulse(self.samples * math.sqrt(energy / e))


@dataclass(frozen=True)
class Esd:
    """Half-spectrum energy spectral density on bins ``0..N_B``."""

    omega: np.ndarray
    config: FrameConfig

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=np.float64).ravel()
        if w.size != self.config.N_B + 1:
            raise ValueError(f"omega must have N_B+1 = {self.config.N_B + 1} entries, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("omega must be finite")
        if np.any(w < 0):
            raise ValueError(f"omega must be nonnegative (min {w.min():.3e})")
        object.__setattr__(self, "omega", _frozen(w))

    def full(self) -> np.ndarray:
        """Mirrored full spectrum of length ``L_g``."""
        return mirror_matrix(self.config) @ self.omega


def mirror_matrix(config: FrameConfig) -> np.ndarray:
    """Matrix ``B`` mapping the half spectrum (N_B+1) to the full spectrum (L_g)."""
    B = np.zeros((config.L_g, config.N_B + 1))
    B[0, 0] = 1.0
    for n in range(1, config.N_B + 1):
        B[n, n] = 1.0
        B[config.L_g - n, n] = 1.0
    return B


def project_to_esd(omega: np.ndarray, config: FrameConfig, tol: float = 1e-8) -> Esd:
    """Build an Esd from solver output, clipping round-off negatives above ``-tol``."""
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < -tol):
        raise ValueError(f"omega has entries below -{tol}: min {w.min():.3e}")
    return Esd(np.maximum(w, 0.0), config)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy, circularly symmetric symbol alphabet."""

    points: np.ndarray
    name: str = "custom"
    kurtosis: float = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.complex128).ravel()
        if p.size < 2:
            raise ValueError("a constellation needs at least two points")
        if abs(np.mean(p)) > 1e-12:
            raise ValueError("constellation must be centred at the origin")
        if abs(np.mean(np.abs(p) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation must have unit average energy")
        if abs(np.mean(p ** 2)) > 1e-12:
            raise ValueError("constellation must be circularly symmetric (E[s^2] = 0)")
        object.__setattr__(self, "points", _frozen(p))
        object.__setattr__(self, "kurtosis", float(np.mean(np.abs(p) ** 4)))

    @property
    def bits_per_symbol(self) -> float:
        return math.log2(self.points.size)


def _square_qam(order: int) -> np.ndarray:
    side = int(round(math.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


def make_constellation(kind: str) -> Constellation:
    """Return one of ``QPSK``, ``16QAM`` or ``64QAM`` (case insensitive)."""
    key = kind.upper().replace("-", "")
    if key == "QPSK":
        pts = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
        return Constellation(pts, "QPSK")
    if key in ("16QAM", "QAM16"):
        return Constellation(_square_qam(16), "16QAM")
    if key in ("64QAM", "QAM64"):
        return Constellation(_square_qam(64), "64QAM")
    raise ValueError(f"unknown constellation {kind!r}; expected QPSK, 16QAM or 64QAM")


def raised_cosine(x: np.ndarray, beta: float) -> np.ndarray:
    """Raised-cosine spectral shape at normalised frequency ``x = fT`` (peak 1)."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    if beta == 0:
        out[ax < 0.5] = 1.0
        out[np.isclose(ax, 0.5, rtol=0, atol=1e-12)] = 0.5
        return out
    lo, hi = (1 - beta) / 2, (1 + beta) / 2
    out[ax <= lo] = 1.0
    mid = (ax > lo) & (ax <= hi)
    out[mid] = 0.5 * (1 + np.cos(np.pi / beta * (ax[mid] - lo)))
    return out


def make_rrc_esd(config: FrameConfig) -> Esd:
    """Root-raised-cosine ESD sampled on bins ``0..N_B`` with flat level ``N_T``.

    Examples
    --------
    >>> esd = make_rrc_esd(FrameConfig(beta=0.3))
    >>> float(esd.omega[0]), float(esd.omega[8])
    (16.0, 8.0)
    """
    x = np.arange(config.N_B + 1) / config.M
    return Esd(config.N_T * raised_cosine(x, config.beta), config)


def esd_to_acf(esd: Esd) -> np.ndarray:
    """Circular autocorrelation (length ``L_g``) of any pulse with this ESD."""
    return np.fft.ifft(esd.full()).real


def esd_to_pulse(esd: Esd, energy: float = 1.0) -> Pulse:
    """Zero-phase pulse with the given ESD, circularly centred at ``L_g // 2``."""
    full = esd.full()
    g = np.fft.ifft(np.sqrt(full))
    g = np.roll(g, esd.config.L_g // 2)
    # a real, even spectrum gives a real pulse; drop the round-off imaginary part
    g = g.real.astype(np.complex128)
    pulse = Pulse(g)
    return pulse.normalized(energy) if pulse.energy > 0 else pulse


def pulse_to_esd(pulse: Pulse, config: FrameConfig) -> np.ndarray:
    """Half-spectrum ``|DFT(g)|^2`` on bins ``0..N_B`` (no validation of band limits)."""
    return np.abs(np.fft.fft(pulse.samples, config.L_g)[: config.N_B + 1]) ** 2


def discrete_af(pulse: Pulse, u: int, v: int, config: FrameConfig) -> complex:
    """Discrete ambiguity function ``sum_k conj(g_k) g_{k-u} exp(2j pi v k / K)``.

    Parameters
    ----------
    u : int
        Signed delay bin, ``|u| <= L_g``; ``u = +-L_g`` has no overlap and
        returns 0.
    v : int
        Doppler bin, taken modulo ``K``.
    """
    if int(u) != u or abs(u) > config.L_g:
        raise ValueError(f"invalid delay bin u={u}: need |u| <= L_g = {config.L_g}")
    _check_len(pulse, config)
    g = pulse.samples
    return complex(kernels.lag_products(g, g, [int(u)], [int(v)], config.K)[0])


def af_grid(pulse: Pulse, delays, dopplers, config: FrameConfig) -> np.ndarray:
    """Discrete AF on the Cartesian grid ``delays x dopplers``."""
    _check_len(pulse, config)
    d = np.asarray(delays, dtype=np.int64)
    v = np.asarray(dopplers, dtype=np.int64)
    if np.any(np.abs(d) > config.L_g):
        raise ValueError(f"invalid delay bin: need |u| <= L_g = {config.L_g}")
    uu, vv = np.meshgrid(d, v, indexing="ij")
    g = pulse.samples
    vals = kernels.lag_products(g, g, uu.ravel(), vv.ravel(), config.K)
    return vals.reshape(uu.shape)


def _check_len(pulse: Pulse, config: FrameConfig) -> None:
    if len(pulse) != config.L_g:
        raise ValueError(f"pulse length {len(pulse)} does not match L_g = {config.L_g}")


def rrc_impulse_response(t: np.ndarray, beta: float, T: float) -> np.ndarray:
    """Continuous-time root-raised-cosine impulse response (unit peak-energy scaling).

    Used as an independent reference; ``t`` and ``T`` share units.
    """
    t = np.asarray(t, dtype=float) / T
    out = np.empty_like(t)
    b = beta
    zero = np.isclose(t, 0.0, atol=1e-12)
    if b > 0:
        sing = np.isclose(np.abs(t), 1 / (4 * b), atol=1e-12)
    else:
        sing = np.zeros_like(t, dtype=bool)
    reg = ~(zero | sing)
    tr = t[reg]
    num = np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))
    den = np.pi * tr * (1 - (4 * b * tr) ** 2)
    out[reg] = num / den
    out[zero] = 1 - b + 4 * b / np.pi
    if np.any(sing):
        out[sing] = b / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                     + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
    return out
