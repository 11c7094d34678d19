import json

import numpy as np
import pytest

from isacpulse.design_problem import (
    QpProblem,
    build_general_problem,
    build_nyquist_system,
    build_qp,
    make_weights,
    range_to_delay_bins,
    rrc_pulse,
)
from isacpulse.optimizers import (
    AdmmConfig,
    InfeasibleProblemError,
    ScaConfig,
    StationaryPointError,
    admm_solve,
    kkt_residual,
    project_feasible,
    reference_solve,
    sca_gradient,
    sca_objective,
    sca_solve,
    sca_subproblem,
)
from isacpulse.signal_core import Esd, FrameConfig, Pulse, make_rrc_esd
from conftest import DESIGN, random_qp

ROI = range_to_delay_bins(8.0, 32.0, DESIGN.f_s)


@pytest.fixture(scope="module")
def design_problem():
    from isacpulse.signal_core import make_constellation
    return build_general_problem(DESIGN, make_weights(ROI), make_constellation("16QAM"))


# ---------------------------------------------------------------------------
# SCA pieces
# ---------------------------------------------------------------------------


def test_gradient_matches_finite_differences(design_problem, rng):
    g = rrc_pulse(DESIGN).real() + 1e-3 * rng.standard_normal(DESIGN.L_g)
    grad = sca_gradient(g, design_problem)
    h = 1e-6
    fd = np.empty_like(g)
    for i in range(g.size):
        e = np.zeros_like(g)
        e[i] = h
        fd[i] = (sca_objective(g + e, design_problem) - sca_objective(g - e, design_problem)) / (2 * h)
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)


def _projector_oracle(c, eps, E, P):
    """Closed-form minimiser of c'g on ||g||^2 = E with out-of-band energy g'Pg <= eps (P a projector)."""
    c_out = P @ c
    c_in = c - c_out
    a_in, a_out = np.linalg.norm(c_in), np.linalg.norm(c_out)
    b2 = E * a_out ** 2 / (a_in ** 2 + a_out ** 2)
    if b2 > eps:
        b2 = eps
    return -np.sqrt(E - b2) * c_in / a_in - np.sqrt(b2) * c_out / max(a_out, 1e-300)


@pytest.mark.parametrize("eps", [1e-4, 1e-2, 0.5, 10.0])
def test_subproblem_matches_closed_form_projector_case(eps, rng):
    n = 24
    mask = np.zeros(n, bool)
    mask[5:20] = True                      # symmetric about n/2, so P is a real projector
    F = np.fft.fft(np.eye(n), norm="ortho")
    P = (F.conj().T[:, mask] @ F[mask, :]).real
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    for _ in range(5):
        c = rng.standard_normal(n)
        x = sca_subproblem(c, eps, 2.0, P)
        ref = _projector_oracle(c, eps, 2.0, P)
        assert c @ x == pytest.approx(c @ ref, rel=1e-9)
        assert x @ x == pytest.approx(2.0, rel=1e-9)
        assert x @ P @ x <= eps * (1 + 1e-9)


def test_subproblem_beats_random_feasible_points(rng):
    n = 8
    R = rng.standard_normal((n, n))
    P = R.T @ np.diag(rng.random(n) ** 3) @ R      # general PSD, not a projector
    c = rng.standard_normal(n)
    E, eps = 1.0, 0.05 * np.linalg.eigvalsh(P)[-1]
    x = sca_subproblem(c, eps, E, P)
    assert x @ P @ x <= eps * (1 + 1e-9) and x @ x == pytest.approx(E)
    best = np.inf
    for y in rng.standard_normal((200000, n)):
        y *= np.sqrt(E / (y @ y))
        if y @ P @ y <= eps:
            best = min(best, c @ y)
    assert c @ x <= best + 1e-12


def test_subproblem_rejects_stationary_point():
    with pytest.raises(StationaryPointError):
        sca_subproblem(np.zeros(4), 1e-3, 1.0, np.eye(4))


def test_sca_run_is_monotone_and_feasible(design_problem):
    rep = sca_solve(rrc_pulse(DESIGN), design_problem)
    assert rep.converged and rep.iterations <= 15
    assert all(b <= a * (1 + 1e-12) for a, b in zip(rep.objective_trace, rep.objective_trace[1:]))
    g = rep.solution.real()
    assert g @ g == pytest.approx(1.0, abs=1e-10)
    assert design_problem.oobe(g) <= design_problem.eps_oobe * (1 + 1e-9)
    json.dumps(rep.to_dict())


def test_sca_rejects_infeasible_start(design_problem):
    with pytest.raises(ValueError, match="energy"):
        sca_solve(Pulse(2 * rrc_pulse(DESIGN).samples), design_problem)
    spike = np.zeros(DESIGN.L_g)
    spike[0] = 1.0
    with pytest.raises(ValueError, match="OOBE"):
        sca_solve(Pulse(spike), design_problem)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(i_max=-1)])
def test_sca_config_validation(kw):
    with pytest.raises(ValueError):
        ScaConfig(**kw)


def test_zero_iteration_budget_returns_start(design_problem):
    rep = sca_solve(rrc_pulse(DESIGN), design_problem, ScaConfig(i_max=0))
    assert rep.iterations == 0 and not rep.converged
    np.testing.assert_array_equal(rep.solution.real(), rrc_pulse(DESIGN).real())


# ---------------------------------------------------------------------------
# ADMM and the reference solver
# ---------------------------------------------------------------------------


def _grid_oracle(problem, n_grid=801):
    """Exhaustive search over the two free splits of a small Nyquist system."""
    A, b = problem.A, problem.rhs
    pinned, pairs, halves = [], [], []
    for row, rhs in zip(A, b):
        nz = np.flatnonzero(row)
        (pairs if nz.size == 2 else pinned).append((nz, row[nz], rhs))
    assert len(pairs) == 2
    base = np.zeros(problem.n)
    for nz, coef, rhs in pinned:
        base[nz[0]] = rhs / coef[0]
    t = np.linspace(0.0, 1.0, n_grid)
    best = np.inf
    for s1 in t:
        w = base.copy()
        (i1, j1), _, r1 = pairs[0]
        w[i1], w[j1] = s1 * r1, (1 - s1) * r1
        (i2, j2), _, r2 = pairs[1]
        W = np.repeat(w[None, :], n_grid, axis=0)
        W[:, i2], W[:, j2] = t * r2, (1 - t) * r2
        best = min(best, float(np.min(np.einsum("ij,jk,ik->i", W, problem.Q, W))))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_admm_matches_grid_search_on_small_problem(seed):
    rng = np.random.default_rng(seed)
    cfg = FrameConfig(L=16, N_T=4, L_g=32, beta=0.5)
    assert cfg.N_B == 6
    A, b = build_nyquist_system(cfg)
    Bm = rng.standard_normal((5, cfg.N_B + 1))
    prob = QpProblem(Bm.T @ Bm, A, b, cfg)
    rep = admm_solve(prob, AdmmConfig(), make_rrc_esd(cfg))
    assert rep.converged
    f = prob.objective(rep.solution.omega)
    grid = _grid_oracle(prob)
    assert f <= grid * (1 + 1e-9) + 1e-12
    assert grid <= f * (1 + 1e-3) + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_admm_agrees_with_reference(seed):
    prob = random_qp(np.random.default_rng(100 + seed))
    rep = admm_solve(prob)
    ref = reference_solve(prob)
    w, r = rep.solution.omega, ref.omega
    assert rep.converged
    assert prob.objective(w) == pytest.approx(prob.objective(r), rel=1e-6, abs=1e-12)
    assert prob.residual(w) <= 1e-8 and w.min() >= 0
    assert kkt_residual(prob, r) <= 1e-8


def test_paper_dual_rule_matches_standard_when_bounds_inactive(qam16):
    prob = build_qp(DESIGN, make_weights(ROI), qam16)
    std = admm_solve(prob, AdmmConfig(), make_rrc_esd(DESIGN))
    pap = admm_solve(prob, AdmmConfig(dual_update="paper"), make_rrc_esd(DESIGN))
    assert std.iterations <= 5
    np.testing.assert_allclose(pap.solution.omega, std.solution.omega, atol=1e-8)


def test_admm_rejects_rank_deficient_constraints():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    prob = QpProblem(np.eye(3), A, np.array([1.0, 2.0]))
    with pytest.raises(np.linalg.LinAlgError, match="rank deficient by 1"):
        admm_solve(prob)


def test_admm_without_config_returns_vector():
    prob = QpProblem(np.diag([1.0, 2.0, 3.0]), np.array([[1.0, 1.0, 1.0]]), np.array([1.0]))
    rep = admm_solve(prob)
    # minimiser of sum d_i w_i^2 on the simplex: w_i proportional to 1/d_i
    ref = (1 / np.array([1.0, 2.0, 3.0])) / np.sum(1 / np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(rep.solution, ref, atol=1e-8)
    np.testing.assert_allclose(reference_solve(prob), ref, atol=1e-9)


@pytest.mark.parametrize("kw", [dict(varrho=0.0), dict(epsilon=-1.0), dict(dual_update="other")])
def test_admm_config_validation(kw):
    with pytest.raises(ValueError):
        AdmmConfig(**kw)


def test_reference_detects_infeasibility():
    prob = QpProblem(np.eye(2), np.array([[1.0, 1.0]]), np.array([-1.0]))
    with pytest.raises(InfeasibleProblemError):
        reference_solve(prob)


def test_projection_is_nonexpansive_and_optimal(rng):
    prob = random_qp(rng)
    y = rng.standard_normal(prob.n) * 10
    p = project_feasible(prob, y)
    assert prob.residual(p) < 1e-10 and p.min() >= 0
    for _ in range(200):
        z = project_feasible(prob, rng.standard_normal(prob.n) * 10)
        # variational inequality of the Euclidean projection onto a convex set
        assert (y - p) @ (z - p) <= 1e-9 * (1 + np.linalg.norm(y))
