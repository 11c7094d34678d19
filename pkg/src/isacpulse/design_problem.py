"""Regions of interest, clutter weights, Nyquist constraints and design problems.

Two problem shapes are built here:

* :class:`QpProblem` -- the band-limited Nyquist case, where the ESD ``omega``
  is the variable and the weighted ISL is a convex quadratic ``omega' Q omega``
  subject to ``A omega = N_T`` and ``omega >= 0``;
* :class:`GeneralProblem` -- the pulse ``g`` itself is the variable, with a
  quartic weighted ISL, an ISI penalty, an out-of-band energy budget and an
  energy equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .af_stats import alpha, alpha0, symbol_lags
from .signal_core import (
    SPEED_OF_LIGHT,
    Constellation,
    Esd,
    FrameConfig,
    Pulse,
    _check_len,
    esd_to_pulse,
    make_rrc_esd,
)


@dataclass(frozen=True)
class DesignWeights:
    """Region of interest ``theta`` (rows of ``(u, v)``) with clutter weights."""

    theta: np.ndarray
    sigma_c: np.ndarray
    sigma_T: float = 1.0

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.int64).reshape(-1, 2)
        sc = np.asarray(self.sigma_c, dtype=float).ravel()
        if th.shape[0] == 0:
            raise ValueError("region of interest must not be empty")
        if sc.size != th.shape[0]:
            raise ValueError("sigma_c needs one weight per (u, v) pair")
        if np.any(sc < 0) or not np.all(np.isfinite(sc)):
            raise ValueError("clutter weights must be finite and nonnegative")
        if self.sigma_T < 0:
            raise ValueError("sigma_T must be nonnegative")
        if len({tuple(r) for r in th.tolist()}) != th.shape[0]:
            raise ValueError("duplicate (u, v) pairs in the region of interest")
        for name, val in (("theta", th), ("sigma_c", sc)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def delays(self) -> np.ndarray:
        return self.theta[:, 0]

    @property
    def dopplers(self) -> np.ndarray:
        return self.theta[:, 1]

    @property
    def is_zero_doppler(self) -> bool:
        return bool(np.all(self.theta[:, 1] == 0))

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "sigma_c": self.sigma_c.tolist(),
                "sigma_T": float(self.sigma_T)}

    @classmethod
    def from_dict(cls, d: dict) -> "DesignWeights":
        return cls(np.asarray(d["theta"]), np.asarray(d["sigma_c"]), float(d.get("sigma_T", 1.0)))


def range_to_delay_bins(r_min: float, r_max: float, f_s: float) -> tuple[int, int]:
    """Map a monostatic range interval in metres to an inclusive delay-bin interval.

    >>> range_to_delay_bins(8.0, 32.0, 320e6)
    (17, 68)
    """
    if not 0 <= r_min < r_max:
        raise ValueError(f"need 0 <= r_min < r_max, got ({r_min}, {r_max})")
    lo = int(round(2 * r_min * f_s / SPEED_OF_LIGHT))
    hi = int(round(2 * r_max * f_s / SPEED_OF_LIGHT))
    if hi <= lo:
        raise ValueError(f"range interval ({r_min}, {r_max}) m collapses to a single delay bin")
    return lo, hi


def make_weights(delays: tuple[int, int], dopplers: tuple[int, int] = (0, 0),
                 profile: str = "uniform", gamma: float = 0.0, f_s: float = 1.0,
                 sigma_T: float = 1.0) -> DesignWeights:
    """Weights on the inclusive rectangle ``delays x dopplers``.

    ``profile="exponential"`` gives ``sigma_c(u) = exp(gamma * u / f_s)``;
    ``gamma`` is in 1/s and must be negative for a decaying clutter profile.
    """
    u0, u1 = int(delays[0]), int(delays[1])
    v0, v1 = int(dopplers[0]), int(dopplers[1])
    if u1 < u0 or v1 < v0:
        raise ValueError("intervals must satisfy lo <= hi")
    uu, vv = np.meshgrid(np.arange(u0, u1 + 1), np.arange(v0, v1 + 1), indexing="ij")
    theta = np.column_stack([uu.ravel(), vv.ravel()])
    if profile == "uniform":
        sig = np.ones(theta.shape[0])
    elif profile == "exponential":
        sig = np.exp(gamma * theta[:, 0] / f_s)
    else:
        raise ValueError(f"unknown weight profile {profile!r}")
    return DesignWeights(theta, sig, sigma_T)


# ---------------------------------------------------------------------------
# Nyquist ESD constraints
# ---------------------------------------------------------------------------


def build_nyquist_system(config: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Linear system ``A omega = N_T * 1`` equivalent to zero ISI of the ESD's ACF.

    Row ``k`` (``k = 0..floor(M/2)``, ``M = L_g / N_T``) states that the
    full spectrum folded with period ``M`` equals ``N_T`` at bin ``k``.  Rows
    with no in-band bin are dropped.  A bin reached twice by the same fold
    (the self-paired midpoint) gets coefficient 2.
    """
    M, NB = config.M, config.N_B
    rows = []
    for k in range(M // 2 + 1):
        row = np.zeros(NB + 1)
        for j in range(-NB, NB + 1):
            if (j - k) % M == 0:
                row[abs(j)] += 1.0
        if row.any():
            rows.append(row)
    A = np.array(rows)
    return A, np.full(A.shape[0], float(config.N_T))


def nyquist_structure(config: FrameConfig) -> dict:
    """Human-readable summary of the Nyquist system: pinned bins, mirror pairs, midpoints."""
    A, _ = build_nyquist_system(config)
    pinned, pairs, halves = [], [], []
    for row in A:
        nz = np.flatnonzero(row)
        if nz.size == 1 and row[nz[0]] == 1:
            pinned.append(int(nz[0]))
        elif nz.size == 1:
            halves.append(int(nz[0]))
        else:
            pairs.append(tuple(int(i) for i in nz))
    return {"pinned": pinned, "pairs": pairs, "midpoints": halves}


def acf_basis(config: FrameConfig, lags) -> np.ndarray:
    """Rows ``c_w`` with ``acf(omega)[w] = c_w @ omega`` (circular ACF)."""
    lags = np.abs(np.asarray(lags, dtype=np.int64))
    n = np.arange(config.N_B + 1)
    C = 2.0 * np.cos(2 * np.pi * np.outer(lags, n) / config.L_g) / config.L_g
    C[:, 0] = 1.0 / config.L_g
    return C


def _check_psd(M: np.ndarray, name: str, tol: float = 1e-9) -> None:
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} is not symmetric")
    ev = np.linalg.eigvalsh(M)
    if ev[0] < -tol * max(ev[-1], 1e-300):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {ev[0]:.3e})")


@dataclass(frozen=True)
class QpProblem:
    """``min omega' Q omega  s.t.  A omega = rhs, omega >= 0``."""

    Q: np.ndarray
    A: np.ndarray
    rhs: np.ndarray
    config: FrameConfig | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.rhs, dtype=float).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if A.shape[1] != Q.shape[0] or A.shape[0] != b.size:
            raise ValueError("inconsistent shapes of Q, A and rhs")
        _check_psd(Q, "Q")
        for name, val in (("Q", Q), ("A", A), ("rhs", b)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def rank_defect(self) -> int:
        return self.A.shape[0] - int(np.linalg.matrix_rank(self.A))

    def objective(self, omega) -> float:
        w = np.asarray(omega, dtype=float)
        return float(w @ self.Q @ w)

    def residual(self, omega) -> float:
        return float(np.max(np.abs(self.A @ np.asarray(omega) - self.rhs)))


def qp_lag_weights(config: FrameConfig, weights: DesignWeights,
                   constellation: Constellation) -> dict[int, float]:
    """Aggregate weight per one-sided lag ``|u + n N_T| < L_g / 2`` (zero Doppler)."""
    if not weights.is_zero_doppler:
        raise ValueError("the ESD quadratic program only supports zero-Doppler regions")
    half = config.L_g / 2
    agg: dict[int, float] = {}
    for u, s in zip(weights.delays, weights.sigma_c):
        u = int(u)
        if not 0 <= u < half:
            raise ValueError(f"delay bin {u} outside [0, L_g/2) for the ACF design")
        for n in symbol_lags(u, config, limit=config.L_g):
            w = abs(u + int(n) * config.N_T)
            if w >= half:
                continue
            agg[w] = agg.get(w, 0.0) + s * alpha(int(n), 0, config, constellation)
    return dict(sorted(agg.items()))


def build_qp(config: FrameConfig, weights: DesignWeights,
             constellation: Constellation) -> QpProblem:
    """Quadratic form of the expected WISL in the ESD, plus the Nyquist constraints."""
    lw = qp_lag_weights(config, weights, constellation)
    lags = np.fromiter(lw.keys(), dtype=np.int64)
    wts = np.fromiter(lw.values(), dtype=float)
    C = acf_basis(config, lags)
    Q = C.T @ (wts[:, None] * C)
    Q = 0.5 * (Q + Q.T)
    A, rhs = build_nyquist_system(config)
    return QpProblem(Q, A, rhs, config)


# ---------------------------------------------------------------------------
# General (pulse-domain) problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LagTable:
    """Weighted list of AF entries ``sum_i coef_i |psi(lags_i, dops_i)|^2``."""

    lags: np.ndarray
    dops: np.ndarray
    coef: np.ndarray

    def evaluate(self, g: np.ndarray, K: int) -> float:
        if self.lags.size == 0:
            return 0.0
        p = kernels.lag_products(g, g, self.lags, self.dops, K)
        return float(np.sum(self.coef * np.abs(p) ** 2))

    @staticmethod
    def from_dict(agg: dict) -> "LagTable":
        keys = sorted(agg)
        lags = np.array([k[0] for k in keys], dtype=np.int64)
        dops = np.array([k[1] for k in keys], dtype=np.int64)
        coef = np.array([agg[k] for k in keys], dtype=float)
        return LagTable(lags, dops, coef)


def wisl_table(config: FrameConfig, weights: DesignWeights,
               constellation: Constellation) -> LagTable:
    """Exact discretised WISL as a lag table over signed lags ``|w| < L_g``."""
    agg: dict[tuple[int, int], float] = {}
    K = config.K
    for (u, v), s in zip(weights.theta, weights.sigma_c):
        u, v = int(u), int(v) % K
        for n in symbol_lags(u, config):
            key = (u + int(n) * config.N_T, v)
            agg[key] = agg.get(key, 0.0) + s * alpha(int(n), v, config, constellation)
    return LagTable.from_dict(agg)


def isi_lags(config: FrameConfig) -> np.ndarray:
    """Positive symbol-spaced lags ``n N_T`` inside the pulse support."""
    n_max = min((config.L_g - 1) // config.N_T, config.L - 1)
    return np.arange(1, n_max + 1) * config.N_T


def isi_table(config: FrameConfig, rho: float) -> LagTable:
    """ISI penalty ``rho * sum_{n != 0} |psi(n N_T, 0)|^2`` as a lag table."""
    pos = isi_lags(config)
    lags = np.concatenate([-pos[::-1], pos])
    return LagTable(lags, np.zeros_like(lags), np.full(lags.size, float(rho)))


def oobe_matrix(config: FrameConfig) -> np.ndarray:
    """``F^H E F`` with the unitary DFT ``F``: projector onto out-of-band bins."""
    Lg = config.L_g
    mask = np.zeros(Lg, dtype=bool)
    mask[config.N_B + 1: Lg - config.N_B] = True
    F = np.fft.fft(np.eye(Lg), norm="ortho")
    P = (F.conj().T[:, mask] @ F[mask, :]).real
    return 0.5 * (P + P.T)


def rrc_pulse(config: FrameConfig) -> Pulse:
    return esd_to_pulse(make_rrc_esd(config))


def rrc_worst_isi(config: FrameConfig) -> float:
    """Largest ``|psi(n N_T, 0)|^2`` of the discrete RRC pulse at this roll-off."""
    g = rrc_pulse(config).samples
    lags = isi_lags(config)
    if lags.size == 0:
        return 0.0
    p = kernels.lag_products(g, g, lags, np.zeros_like(lags), config.K)
    return float(np.max(np.abs(p) ** 2))


@dataclass(frozen=True)
class GeneralProblem:
    """Pulse-domain WISL problem with ISI penalty, OOBE budget and energy equality."""

    config: FrameConfig
    constellation: Constellation
    weights: DesignWeights
    eps_oobe: float
    eps_isi: float
    rho: float
    energy: float
    oobe_matrix: np.ndarray = field(repr=False)
    wisl: LagTable = field(repr=False)
    isi: LagTable = field(repr=False)

    def __post_init__(self):
        if not self.eps_oobe > 0:
            raise ValueError("eps_oobe must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.energy > 0:
            raise ValueError("energy must be positive")
        _check_psd(self.oobe_matrix, "oobe_matrix")

    def objective(self, g: np.ndarray) -> float:
        """Penalised objective ``WISL(g) + rho * ISI(g)``."""
        return self.wisl.evaluate(g, self.config.K) + self.isi.evaluate(g, self.config.K)

    def oobe(self, g: np.ndarray) -> float:
        g = np.asarray(g)
        return float(np.real(np.conj(g) @ self.oobe_matrix @ g))

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "constellation": self.constellation.name,
                "weights": self.weights.to_dict(), "eps_oobe": self.eps_oobe,
                "eps_isi": self.eps_isi, "rho": self.rho, "energy": self.energy}


def build_general_problem(config: FrameConfig, weights: DesignWeights,
                          constellation: Constellation, eps_oobe: float = 1e-3,
                          eps_isi: float | None = None, rho: float | None = None,
                          energy: float = 1.0) -> GeneralProblem:
    """Assemble the pulse-domain problem with the package defaults.

    ``rho`` defaults to ``0.1 * alpha_0(0) * mean(sigma_c)``: one symbol-lag
    ISI term costs a tenth of an average in-region zero-lag term.
    ``eps_isi`` defaults to the discrete RRC's own worst ISI value.
    """
    if rho is None:
        rho = 0.1 * alpha0(config, constellation) * float(np.mean(weights.sigma_c))
    if eps_isi is None:
        eps_isi = rrc_worst_isi(config)
    return GeneralProblem(
        config=config, constellation=constellation, weights=weights,
        eps_oobe=float(eps_oobe), eps_isi=float(eps_isi), rho=float(rho), energy=float(energy),
        oobe_matrix=oobe_matrix(config), wisl=wisl_table(config, weights, constellation),
        isi=isi_table(config, rho),
    )


def eval_general_wisl(pulse: Pulse, config: FrameConfig, weights: DesignWeights,
                      constellation: Constellation) -> float:
    """Exact discretised expected WISL of a pulse (non-circular AF)."""
    _check_len(pulse, config)
    return wisl_table(config, weights, constellation).evaluate(pulse.samples, config.K)


def normalized_wisl(pulse: Pulse, config: FrameConfig, weights: DesignWeights,
                    constellation: Constellation) -> float:
    return eval_general_wisl(pulse, config, weights, constellation) / alpha0(config, constellation)


@dataclass(frozen=True)
class ConstraintReport:
    isi: np.ndarray
    isi_lags: np.ndarray
    oobe: float
    energy: float
    isi_ok: bool
    oobe_ok: bool
    energy_ok: bool

    @property
    def isi_max(self) -> float:
        return float(self.isi.max()) if self.isi.size else 0.0

    @property
    def feasible(self) -> bool:
        return self.isi_ok and self.oobe_ok and self.energy_ok

    def to_dict(self) -> dict:
        return {"isi": self.isi.tolist(), "isi_lags": self.isi_lags.tolist(),
                "isi_max": self.isi_max, "oobe": self.oobe, "energy": self.energy,
                "isi_ok": self.isi_ok, "oobe_ok": self.oobe_ok, "energy_ok": self.energy_ok}


def eval_constraints(pulse: Pulse, problem: GeneralProblem, tol: float = 1e-8) -> ConstraintReport:
    """ISI ``|psi(n N_T, 0)|^2`` per symbol lag, out-of-band energy and energy."""
    cfg = problem.config
    _check_len(pulse, cfg)
    g = pulse.samples
    lags = isi_lags(cfg)
    isi = np.abs(kernels.lag_products(g, g, lags, np.zeros_like(lags), cfg.K)) ** 2
    oobe = problem.oobe(g)
    energy = pulse.energy
    return ConstraintReport(
        isi=isi, isi_lags=lags, oobe=oobe, energy=energy,
        isi_ok=bool(isi.size == 0 or isi.max() <= problem.eps_isi * (1 + tol) + 1e-300),
        oobe_ok=bool(oobe <= problem.eps_oobe + tol),
        energy_ok=bool(abs(energy - problem.energy) <= tol * problem.energy),
    )
