"""Solvers for the two pulse-design problems.

* :func:`sca_solve` -- successive convex approximation for the pulse-domain
  problem: linearise the quartic objective, solve the linear subproblem over
  the OOBE/energy set, then take an exact line-search step.
* :func:`admm_solve` -- ADMM for the ESD quadratic program with the Nyquist
  equalities and nonnegativity split into two blocks.
* :func:`reference_solve` -- an independent accelerated projected-gradient
  solver with active-set polishing, used to certify ADMM.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
from numpy.polynomial import polynomial as P

from . import kernels
from .design_problem import GeneralProblem, QpProblem
from .signal_core import Esd, Pulse, project_to_esd


class StationaryPointError(ValueError):
    """Raised when a linearised subproblem has a zero gradient."""


class InfeasibleProblemError(ValueError):
    """Raised with a certificate when a constraint set is empty."""


@dataclass
class SolveReport:
    solution: object
    objective_trace: list[float]
    residual_trace: list[dict]
    iterations: int
    converged: bool
    wall_time: float
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        if isinstance(self.solution, Pulse):
            sol = {"kind": "pulse", "samples": self.solution.samples.real.tolist()}
        elif isinstance(self.solution, Esd):
            sol = {"kind": "esd", "omega": self.solution.omega.tolist()}
        else:
            sol = {"kind": "vector", "values": np.asarray(self.solution).tolist()}
        return {"solution": sol, "objective_trace": [float(x) for x in self.objective_trace],
                "residual_trace": self.residual_trace, "iterations": self.iterations,
                "converged": self.converged, "wall_time_s": self.wall_time, "info": self.info}


# ---------------------------------------------------------------------------
# SCA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaConfig:
    """Settings of the SCA loop.

    ``line_search_points`` is the evaluation budget of the fallback grid used
    only if the polynomial root finder returns nothing usable.
    """

    epsilon: float = 1e-2
    i_max: int = 50
    line_search_points: int = 201

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.i_max < 0:
            raise ValueError("i_max must be nonnegative")


def _tables(problem: GeneralProblem):
    t1, t2 = problem.wisl, problem.isi
    lags = np.concatenate([t1.lags, t2.lags])
    dops = np.concatenate([t1.dops, t2.dops])
    coef = np.concatenate([t1.coef, t2.coef])
    return lags, dops, coef


def sca_objective(g: np.ndarray, problem: GeneralProblem) -> float:
    lags, dops, coef = _tables(problem)
    p = kernels.lag_products(g, g, lags, dops, problem.config.K)
    return float(np.sum(coef * np.abs(p) ** 2))


def sca_gradient(pulse, problem: GeneralProblem) -> np.ndarray:
    """Gradient of ``WISL(g) + rho * ISI(g)`` for a real pulse ``g``."""
    g = pulse.real() if isinstance(pulse, Pulse) else np.asarray(pulse, dtype=float)
    lags, dops, coef = _tables(problem)
    K = problem.config.K
    psi = kernels.lag_products(g, g, lags, dops, K)
    return kernels.lag_gradient(g, psi, coef, lags, dops, K)


def _sym_eig(M: np.ndarray):
    d, V = np.linalg.eigh(M)
    return np.clip(d, 0.0, None), V


def sca_subproblem(gradient: np.ndarray, eps_oobe: float, energy: float,
                   oobe_matrix: np.ndarray, *, eig=None, tol: float = 1e-12) -> np.ndarray:
    """Minimise ``c' g`` subject to ``g' P g <= eps_oobe`` and ``||g||^2 <= energy``.

    The minimiser lies on the sphere ``||g||^2 = energy``.  With
    multipliers ``lam`` (OOBE) and ``mu`` (energy) it reads
    ``g = -(2 mu I + 2 lam P)^{-1} c``; ``mu`` is found by bisection for each
    trial ``lam`` and ``lam`` by bisection on the OOBE budget.

    ``eig`` may carry a precomputed ``(eigenvalues, eigenvectors)`` of ``P``.
    """
    c = np.asarray(gradient, dtype=float)
    cn = np.linalg.norm(c)
    if cn == 0:
        raise StationaryPointError("zero gradient: the current point is stationary")
    g0 = -math.sqrt(energy) * c / cn
    if g0 @ oobe_matrix @ g0 <= eps_oobe:
        return g0
    d, V = eig if eig is not None else _sym_eig(oobe_matrix)
    ct = V.T @ c
    ct2 = ct ** 2

    def x_of(lam):
        # x_i = -ct_i / (mu + lam d_i), factor 2 absorbed; mu >= 0 fixes the energy
        den0 = lam * d

        def excess(mu):
            return float(np.sum(ct2 / (mu + den0) ** 2)) - energy

        pole = (den0 == 0) & (ct2 > 0)
        if not pole.any():
            safe = np.where(den0 > 0, den0, 1.0)
            x0 = np.where(den0 > 0, -ct / safe, 0.0)
            if float(np.sum(x0 ** 2)) <= energy:
                return x0
        hi = math.sqrt(float(np.sum(ct2)) / energy)
        lo = hi
        while excess(lo) <= 0:
            lo *= 0.5
        mu = scipy.optimize.brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        x = -ct / (mu + den0)
        return x * math.sqrt(energy / float(np.sum(x ** 2)))

    def oobe_of(x):
        return float(np.sum(d * x ** 2))

    lam_lo, lam_hi = 0.0, 1.0
    while oobe_of(x_of(lam_hi)) > eps_oobe:
        lam_hi *= 4.0
        if lam_hi > 1e300:
            raise InfeasibleProblemError("OOBE budget cannot be met on the energy sphere")
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        if oobe_of(x_of(lam)) > eps_oobe:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo <= tol * max(1.0, lam_hi):
            break
    return V @ x_of(lam_hi)


def _ratio_line_search(g, gs, problem: GeneralProblem, energy: float, n_grid: int):
    """Step ``t`` in [0, 1] minimising the objective of the energy-rescaled iterate.

    With ``x(t) = g + t (gs - g)`` the rescaled objective is
    ``f(x(t)) * energy^2 / ||x(t)||^4``, a ratio of quartics in ``t``.  Its
    minimum over the OOBE-feasible part of [0, 1] is found among the real
    roots of the derivative's numerator and the interval endpoints.
    """
    K = problem.config.K
    lags, dops, coef = _tables(problem)
    dvec = gs - g
    a = kernels.lag_products(g, g, lags, dops, K)
    b = kernels.lag_products(g, dvec, lags, dops, K) + kernels.lag_products(dvec, g, lags, dops, K)
    e = kernels.lag_products(dvec, dvec, lags, dops, K)
    # |a + b t + e t^2|^2 = sum_j q_j t^j
    num = np.zeros(5)
    num[0] = np.sum(coef * np.abs(a) ** 2)
    num[1] = np.sum(coef * 2 * np.real(np.conj(a) * b))
    num[2] = np.sum(coef * (np.abs(b) ** 2 + 2 * np.real(np.conj(a) * e)))
    num[3] = np.sum(coef * 2 * np.real(np.conj(b) * e))
    num[4] = np.sum(coef * np.abs(e) ** 2)
    nrm = np.array([g @ g, 2 * (g @ dvec), dvec @ dvec])
    den = P.polymul(nrm, nrm)

    # OOBE feasibility of the rescaled iterate: x'Px * energy / ||x||^2 <= eps
    Pm = problem.oobe_matrix
    occ = np.array([g @ Pm @ g, 2 * (g @ Pm @ dvec), dvec @ Pm @ dvec])
    feas = occ - (problem.eps_oobe / energy) * nrm
    t_max = 1.0
    roots = P.polyroots(feas) if np.any(feas[1:] != 0) else np.array([])
    for r in sorted(r.real for r in roots if abs(r.imag) < 1e-12 and 1e-14 < r.real < 1.0):
        if P.polyval(min(1.0, r + 1e-9), feas) > 0:
            t_max = r
            break

    crit = P.polysub(P.polymul(P.polyder(num), den), P.polymul(num, P.polyder(den)))
    cands = [0.0, t_max]
    if np.any(crit != 0):
        for r in P.polyroots(crit):
            if abs(r.imag) < 1e-9 and 0.0 < r.real < t_max:
                cands.append(float(r.real))
    if len(cands) == 2 and n_grid > 2:
        cands.extend(np.linspace(0.0, t_max, n_grid)[1:-1].tolist())

    def ratio(t):
        dd = P.polyval(t, den)
        return P.polyval(t, num) / dd if dd > 0 else np.inf

    vals = [ratio(t) for t in cands]
    best = int(np.argmin(vals))
    return cands[best], t_max


def sca_solve(initial: Pulse, problem: GeneralProblem, config: ScaConfig = ScaConfig()) -> SolveReport:
    """Run SCA from a feasible real pulse.

    Every iterate is rescaled to the energy sphere and kept within the OOBE
    budget, and the penalised objective never increases.
    """
    t_start = time.perf_counter()
    E = problem.energy
    g = initial.real()
    if abs(g @ g - E) > 1e-8 * E:
        raise ValueError(f"initial pulse energy {g @ g:.12g} differs from E_g = {E}")
    if problem.oobe(g) > problem.eps_oobe * (1 + 1e-9):
        raise ValueError(f"initial pulse violates the OOBE budget ({problem.oobe(g):.3e} > {problem.eps_oobe:.3e})")

    eig = _sym_eig(problem.oobe_matrix)
    f = sca_objective(g, problem)
    trace = [f]
    resid = [_sca_residuals(g, problem, step=float("nan"), t=float("nan"))]
    converged = False
    it = 0
    for it in range(1, config.i_max + 1):
        c = sca_gradient(g, problem)
        try:
            gs = sca_subproblem(c, problem.eps_oobe, E, problem.oobe_matrix, eig=eig)
        except StationaryPointError:
            converged = True
            it -= 1
            break
        t, _ = _ratio_line_search(g, gs, problem, E, config.line_search_points)
        x = g + t * (gs - g)
        g_new = x * math.sqrt(E / float(x @ x))
        f_new = sca_objective(g_new, problem)
        if not f_new <= f:
            g_new, f_new, t = g, f, 0.0
        step = float(np.linalg.norm(g_new - g))
        g, f = g_new, f_new
        trace.append(f)
        resid.append(_sca_residuals(g, problem, step=step, t=t))
        if step <= config.epsilon:
            converged = True
            break
    info = {"rho": problem.rho, "eps_oobe": problem.eps_oobe, "final_objective": f}
    return SolveReport(Pulse(g), trace, resid, it, converged,
                       time.perf_counter() - t_start, info)


def _sca_residuals(g, problem: GeneralProblem, step: float, t: float) -> dict:
    return {"oobe": problem.oobe(g), "energy_error": float(abs(g @ g - problem.energy)),
            "isi_penalty": problem.isi.evaluate(g, problem.config.K) / problem.rho,
            "step": step, "t": t}


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmmConfig:
    """ADMM settings.

    ``varrho=None`` picks ``1e-4`` times the smallest positive eigenvalue of
    ``2Q`` restricted to the null space of ``A``.  ``dual_update`` is
    ``"standard"`` (accumulating multiplier) or ``"paper"``
    (``lambda = varrho (omega - theta)``, no accumulation; only reliable when
    no nonnegativity bound is active at the optimum).  ``adaptive`` rescales
    ``varrho`` by residual balancing in standard mode.
    """

    varrho: float | None = None
    epsilon: float = 1e-10
    i_max: int = 5000
    dual_update: str = "standard"
    adaptive: bool = True

    def __post_init__(self):
        if self.varrho is not None and not self.varrho > 0:
            raise ValueError("varrho must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.dual_update not in ("standard", "paper"):
            raise ValueError("dual_update must be 'standard' or 'paper'")


def _null_space_hessian_scale(problem: QpProblem) -> float:
    Z = scipy.linalg.null_space(problem.A)
    if Z.shape[1] == 0:
        return float(max(np.linalg.eigvalsh(2 * problem.Q)[-1], 1.0))
    H = Z.T @ (2 * problem.Q) @ Z
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    pos = ev[ev > 1e-12 * max(ev[-1], 1e-300)]
    return float(pos[0]) if pos.size else 1.0


def _kkt_factor(problem: QpProblem, varrho: float):
    n, m = problem.n, problem.A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = 2 * problem.Q + varrho * np.eye(n)
    K[:n, n:] = problem.A.T
    K[n:, :n] = problem.A
    return scipy.linalg.lu_factor(K, check_finite=True)


def admm_solve(problem: QpProblem, config: AdmmConfig = AdmmConfig(),
               initial: Esd | np.ndarray | None = None) -> SolveReport:
    """ADMM for ``min omega' Q omega`` s.t. ``A omega = rhs``, ``omega = theta``, ``theta >= 0``.

    Each iteration solves the KKT system
    ``[[2Q + varrho I, A'], [A, 0]] [omega; nu] = [varrho theta - lambda; rhs]``
    with a factorisation that is reused until ``varrho`` changes.
    """
    t_start = time.perf_counter()
    defect = problem.rank_defect
    if defect:
        raise np.linalg.LinAlgError(
            f"singular KKT matrix: constraint matrix A is rank deficient by {defect}")
    n = problem.n
    if initial is None:
        theta = np.zeros(n)
    else:
        theta = np.asarray(initial.omega if isinstance(initial, Esd) else initial, dtype=float).copy()
    varrho = config.varrho if config.varrho is not None else 1e-4 * _null_space_hessian_scale(problem)
    lam = np.zeros(n)
    lu = _kkt_factor(problem, varrho)
    omega_prev = theta.copy()
    trace, resid = [problem.objective(theta)], []
    converged = False
    n_factor = 1
    it = 0
    for it in range(1, config.i_max + 1):
        rhs = np.concatenate([varrho * theta - lam, problem.rhs])
        omega = scipy.linalg.lu_solve(lu, rhs)[:n]
        theta_new = np.maximum(omega + lam / varrho, 0.0)
        if config.dual_update == "standard":
            lam = lam + varrho * (omega - theta_new)
        else:
            lam = varrho * (omega - theta_new)
        r_prim = float(np.max(np.abs(omega - theta_new)))
        r_dual = float(varrho * np.linalg.norm(theta_new - theta))
        step = float(np.linalg.norm(omega - omega_prev))
        theta, omega_prev = theta_new, omega
        trace.append(problem.objective(omega))
        resid.append({"primal": r_prim, "dual": r_dual, "step": step,
                      "nyquist": problem.residual(omega), "varrho": varrho})
        if step <= config.epsilon and r_prim <= config.epsilon and r_dual <= config.epsilon:
            converged = True
            break
        if config.adaptive and config.dual_update == "standard" and n_factor < 200:
            if r_prim > 10 * r_dual:
                varrho *= 2.0
            elif r_dual > 10 * r_prim:
                varrho *= 0.5
            else:
                continue
            lu = _kkt_factor(problem, varrho)
            n_factor += 1
    info = {"final_varrho": varrho, "factorizations": n_factor,
            "dual_update": config.dual_update}
    sol = omega_prev
    if problem.config is not None and np.all(sol >= -1e-8):
        sol = project_to_esd(sol, problem.config)
    return SolveReport(sol, trace, resid, it, converged, time.perf_counter() - t_start, info)


# ---------------------------------------------------------------------------
# Reference solver
# ---------------------------------------------------------------------------


def _row_blocks(problem: QpProblem):
    A, b = problem.A, problem.rhs
    used = np.zeros(problem.n, dtype=bool)
    blocks = []
    for i, row in enumerate(A):
        idx = np.flatnonzero(row)
        if idx.size == 0:
            if b[i] != 0:
                raise InfeasibleProblemError(f"row {i} reads 0 = {b[i]}")
            continue
        if np.any(row[idx] < 0) or np.any(used[idx]):
            raise ValueError("reference solver needs rows with disjoint supports and positive coefficients")
        if b[i] < 0:
            raise InfeasibleProblemError(
                f"row {i}: positive combination of nonnegative variables cannot equal {b[i]}")
        used[idx] = True
        blocks.append((idx, row[idx], b[i]))
    return blocks, np.flatnonzero(~used)


def _project_block(y, a, b):
    """Project ``y`` onto ``{x >= 0, a'x = b}`` for ``a > 0``."""
    if b == 0:
        return np.zeros_like(y)
    br = y / a
    order = np.argsort(-br)
    sa_y, sa2 = 0.0, 0.0
    for k, i in enumerate(order):
        sa_y += a[i] * y[i]
        sa2 += a[i] ** 2
        tau = (sa_y - b) / sa2
        nxt = br[order[k + 1]] if k + 1 < order.size else -np.inf
        if nxt <= tau <= br[i] + 1e-300 or k + 1 == order.size:
            return np.maximum(y - tau * a, 0.0)
    return np.maximum(y - tau * a, 0.0)  # pragma: no cover


def project_feasible(problem: QpProblem, y: np.ndarray, _blocks=None) -> np.ndarray:
    """Euclidean projection onto ``{A omega = rhs, omega >= 0}`` (separable rows only)."""
    blocks, free = _blocks if _blocks is not None else _row_blocks(problem)
    x = np.empty_like(y)
    for idx, a, b in blocks:
        x[idx] = _project_block(y[idx], a, b)
    x[free] = np.maximum(y[free], 0.0)
    return x


def kkt_residual(problem: QpProblem, omega: np.ndarray) -> float:
    """Projected-gradient stationarity measure with step ``1 / lambda_max(2Q)``."""
    lmax = max(float(np.linalg.eigvalsh(2 * problem.Q)[-1]), 1e-300)
    g = 2 * problem.Q @ omega
    return float(np.max(np.abs(omega - project_feasible(problem, omega - g / lmax))))


def _polish(problem: QpProblem, omega: np.ndarray, zero_tol: float):
    n = problem.n
    Z = omega <= zero_tol
    F = ~Z
    A, b, Q = problem.A, problem.rhs, problem.Q
    AF = A[:, F]
    nf, m = int(F.sum()), A.shape[0]
    K = np.zeros((nf + m, nf + m))
    K[:nf, :nf] = 2 * Q[np.ix_(F, F)]
    K[:nf, nf:] = AF.T
    K[nf:, :nf] = AF
    sol, *_ = np.linalg.lstsq(K, np.concatenate([np.zeros(nf), b]), rcond=None)
    x = np.zeros(n)
    x[F] = sol[:nf]
    return x


def reference_solve(problem: QpProblem, tol: float = 1e-10, max_iter: int = 200_000) -> Esd | np.ndarray:
    """Accelerated projected gradient plus active-set polish.

    Returns an :class:`Esd` when the problem carries a frame configuration,
    otherwise the raw vector.  Raises :class:`InfeasibleProblemError` when the
    constraint set is empty.
    """
    blocks = _row_blocks(problem)
    proj = lambda y: project_feasible(problem, y, blocks)  # noqa: E731
    lmax = max(float(np.linalg.eigvalsh(2 * problem.Q)[-1]), 1e-300)
    step = 1.0 / lmax
    x = proj(np.zeros(problem.n))
    y, tk = x.copy(), 1.0
    best, best_res = x, kkt_residual(problem, x)
    scale = max(1.0, float(np.max(np.abs(problem.rhs))))
    for k in range(1, max_iter + 1):
        x_new = proj(y - step * (2 * problem.Q @ y))
        if problem.objective(x_new) > problem.objective(x):
            # adaptive restart of the momentum
            y, tk = x.copy(), 1.0
            x_new = proj(x - step * (2 * problem.Q @ x))
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * tk * tk))
        y = x_new + (tk - 1) / t_new * (x_new - x)
        x, tk = x_new, t_new
        if k % 25 == 0:
            cand = _polish(problem, x, 1e-9 * scale)
            if np.all(cand >= -1e-12 * scale) and problem.residual(cand) <= 1e-10 * scale:
                cand = np.maximum(cand, 0.0)
                r = kkt_residual(problem, cand)
                if r < best_res:
                    best, best_res = cand, r
                if r <= tol * scale:
                    break
            r = kkt_residual(problem, x)
            if r < best_res:
                best, best_res = x, r
            if best_res <= tol * scale:
                break
    if problem.config is not None:
        return project_to_esd(best, problem.config)
    return best
