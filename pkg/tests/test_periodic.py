"""Periodic solvers: cost, exact adjoint gradient, the three routes, probes."""

import math

import numpy as np
import pytest

from exitpde import (
    Field,
    IllConditioned,
    NotConverged,
    PeriodicSolution,
    SolutionMeta,
    SpaceTimeGrid,
    StepCollapse,
    apply_period_operator,
    bilinear_form,
    coercivity_probe,
    cost_F,
    gradient_F,
    h1_norm_sq,
    make_forced_brownian,
    period_spectral_radius,
    solve_banach,
    solve_direct,
    solve_gradient,
    to_expected_duration,
    verify_pde_residual,
)


def brownian_rho(grid, sigma=1.0):
    """Exact spectral radius of the one-period map for pure diffusion: the
    lowest discrete sine mode decays by (1 + dt mu)^(-1) per implicit step."""
    mu = sigma**2 * (1.0 - math.cos(math.pi * grid.h)) / grid.h**2
    return (1.0 + grid.dt * mu) ** (-grid.n_t)


@pytest.fixture(scope="module")
def small_grid():
    return SpaceTimeGrid(0.0, 1.0, 15, 16, 1.0)


# --- cost and gradient --------------------------------------------------------


def test_cost_zero_for_homogeneous_zero(forced_brownian, small_grid):
    assert cost_F(np.zeros(15), None, forced_brownian, small_grid) == 0.0


def test_cost_quadratic_midpoint_identity(forced_brownian, small_grid):
    # F is quadratic with linear part Phi - I, so the parallelogram law
    # pins the convexity gap exactly; a strictly positive gap certifies
    # strict convexity along the segment
    rng = np.random.default_rng(5)
    phi = rng.standard_normal(15)
    psi = rng.standard_normal(15)
    mid = cost_F(0.5 * (phi + psi), 1.0, forced_brownian, small_grid)
    avg = 0.5 * cost_F(phi, 1.0, forced_brownian, small_grid) + 0.5 * cost_F(
        psi, 1.0, forced_brownian, small_grid
    )
    d = phi - psi
    md = apply_period_operator(d, None, forced_brownian, small_grid) - d
    gap = 0.125 * small_grid.l2_norm(md) ** 2
    assert gap > 0.0
    assert mid == pytest.approx(avg - gap, rel=1e-10)


def test_gradient_matches_directional_differences(forced_brownian, small_grid):
    rng = np.random.default_rng(1)
    eps = 1e-5
    for _ in range(5):
        phi = rng.standard_normal(15)
        direction = rng.standard_normal(15)
        grad = gradient_F(phi, 1.0, forced_brownian, small_grid)
        paired = small_grid.inner(grad, direction)
        fd = (
            cost_F(phi + eps * direction, 1.0, forced_brownian, small_grid)
            - cost_F(phi - eps * direction, 1.0, forced_brownian, small_grid)
        ) / (2 * eps)
        assert paired == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_gradient_pairing_identity(forced_brownian, small_grid):
    # <grad F(phi), psi> = <A phi - phi, Phi psi - psi> by adjointness
    rng = np.random.default_rng(2)
    phi = rng.standard_normal(15)
    psi = rng.standard_normal(15)
    w0 = apply_period_operator(phi, 1.0, forced_brownian, small_grid) - phi
    lhs = small_grid.inner(gradient_F(phi, 1.0, forced_brownian, small_grid), psi)
    rhs = small_grid.inner(
        w0, apply_period_operator(psi, None, forced_brownian, small_grid) - psi
    )
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


def test_gradient_vanishes_at_fixed_point(forced_brownian, small_grid):
    v0 = solve_direct(1.0, forced_brownian, small_grid).initial_values()
    grad = gradient_F(v0, 1.0, forced_brownian, small_grid)
    assert small_grid.l2_norm(grad) <= 1e-12


# --- fixed-point iteration ----------------------------------------------------


def test_banach_converges_and_reports(forced_brownian, small_grid):
    solution, report = solve_banach(1.0, forced_brownian, small_grid, tol_F=1e-12)
    assert report.converged
    assert report.tolerance_used == 1e-12
    assert solution.meta.solver == "banach"
    assert solution.meta.final_cost <= 1e-12
    assert solution.meta.iterations == len(report.cost_history)
    # linear contraction makes the cost strictly decreasing
    assert all(b < a for a, b in zip(report.cost_history, report.cost_history[1:]))
    assert {"peclet", "advection_cfl"} <= set(report.guidance)


def test_banach_contraction_estimates_match_spectral_radius(brownian, small_grid):
    _, report = solve_banach(1.0, brownian, small_grid, tol_F=1e-14)
    assert report.contraction_estimates
    rho = brownian_rho(small_grid)
    assert report.contraction_estimates[-1] == pytest.approx(rho, rel=0.2)


def test_banach_homogeneous_stops_at_zero(forced_brownian, small_grid):
    solution, report = solve_banach(None, forced_brownian, small_grid)
    assert report.converged
    assert solution.meta.iterations == 1
    np.testing.assert_array_equal(solution.initial_values(), np.zeros(15))


def test_banach_not_converged_carries_report(forced_brownian, small_grid):
    with pytest.raises(NotConverged) as info:
        solve_banach(1.0, forced_brownian, small_grid, tol_F=1e-12, max_iter=1)
    assert info.value.report is not None
    assert len(info.value.report.cost_history) == 1
    assert not info.value.report.converged


# --- gradient descent -----------------------------------------------------------


def test_gradient_descent_converges(forced_brownian, small_grid):
    solution, report = solve_gradient(1.0, forced_brownian, small_grid, tol_F=1e-12)
    assert report.converged
    assert solution.meta.solver == "gradient"
    assert solution.meta.final_cost <= 1e-12
    # only accepted steps are recorded, so the history decreases strictly
    assert all(b < a for a, b in zip(report.cost_history, report.cost_history[1:]))


def test_gradient_descent_from_random_starts(forced_brownian, small_grid):
    rng = np.random.default_rng(9)
    for _ in range(3):
        start = 5.0 * rng.standard_normal(15)
        solution, report = solve_gradient(
            1.0, forced_brownian, small_grid, tol_F=1e-12, start=start
        )
        assert report.converged
        assert solution.meta.final_cost <= 1e-12


def test_gradient_descent_start_shape_guard(forced_brownian, small_grid):
    with pytest.raises(ValueError, match="shape"):
        solve_gradient(1.0, forced_brownian, small_grid, start=np.zeros(7))


def test_gradient_descent_signed_inhomogeneity(forced_brownian, small_grid):
    # f = -1 disables the nonnegative projection; the solution flips sign
    neg, _ = solve_gradient(-1.0, forced_brownian, small_grid, tol_F=1e-14)
    pos, _ = solve_gradient(1.0, forced_brownian, small_grid, tol_F=1e-14)
    assert np.all(neg.initial_values() < 0.0)
    np.testing.assert_allclose(
        neg.initial_values(), -pos.initial_values(), rtol=1e-5, atol=1e-9
    )


def test_gradient_descent_step_collapse_at_numerical_floor():
    # this configuration has a positive roundoff floor, so an unreachable
    # tolerance forces rejected steps down through the step floor
    sde = make_forced_brownian(sigma=0.1, period=1.0)
    g = SpaceTimeGrid(0.0, 1.0, 3, 1, 1.0)
    with pytest.raises(StepCollapse) as info:
        solve_gradient(1.0, sde, g, tol_F=0.0, max_iter=100_000)
    history = info.value.report.cost_history
    assert history[-1] <= 1e-25  # it genuinely minimised before giving up
    assert all(b < a for a, b in zip(history, history[1:]))


# --- direct solve ----------------------------------------------------------------


def test_direct_residual_at_roundoff(forced_brownian, small_grid):
    solution = solve_direct(1.0, forced_brownian, small_grid)
    assert solution.meta.solver == "direct"
    assert cost_F(solution.initial_values(), 1.0, forced_brownian, small_grid) <= 1e-18


def test_direct_homogeneous_is_zero(forced_brownian, small_grid):
    solution = solve_direct(None, forced_brownian, small_grid)
    np.testing.assert_array_equal(solution.initial_values(), np.zeros(15))


def test_direct_size_guard(forced_brownian, small_grid):
    with pytest.raises(ValueError, match="n_x"):
        solve_direct(1.0, forced_brownian, small_grid, max_n_x=10)


def test_direct_condition_guard(forced_brownian, small_grid):
    with pytest.raises(IllConditioned):
        solve_direct(1.0, forced_brownian, small_grid, cond_limit=1.0)


# --- route agreement --------------------------------------------------------------


def test_three_solvers_agree(forced_brownian, brownian_grid):
    truth = solve_direct(1.0, forced_brownian, brownian_grid).initial_values()
    banach, _ = solve_banach(1.0, forced_brownian, brownian_grid, tol_F=1e-14)
    grad, _ = solve_gradient(1.0, forced_brownian, brownian_grid, tol_F=1e-14)
    assert np.max(np.abs(banach.initial_values() - truth)) <= 5e-6
    assert np.max(np.abs(grad.initial_values() - truth)) <= 5e-6


def test_solutions_nonnegative_and_nontrivial(forced_brownian, small_grid):
    for values in (
        solve_banach(1.0, forced_brownian, small_grid, tol_F=1e-12)[0].initial_values(),
        solve_gradient(1.0, forced_brownian, small_grid, tol_F=1e-12)[0].initial_values(),
        solve_direct(1.0, forced_brownian, small_grid).initial_values(),
    ):
        assert np.all(values > 0.0)


def test_periodicity_residual_ties_to_cost(forced_brownian, small_grid):
    solution, _ = solve_banach(1.0, forced_brownian, small_grid, tol_F=1e-10)
    residual = solution.periodicity_residual()
    assert residual == pytest.approx(math.sqrt(2.0 * solution.meta.final_cost), rel=1e-9)
    assert residual <= math.sqrt(2.0 * 1e-10)


# --- orientation and evaluation ----------------------------------------------------


def test_expected_duration_is_involution(forced_brownian, small_grid):
    solution, _ = solve_banach(1.0, forced_brownian, small_grid, tol_F=1e-10)
    tau = to_expected_duration(solution)
    back = to_expected_duration(tau)
    for k in range(small_grid.n_t + 1):
        np.testing.assert_array_equal(back.slices[k].values, solution.slices[k].values)
        assert tau.slices[k].time_label == pytest.approx(k * small_grid.dt)


def test_autonomous_duration_is_time_invariant_quadratic(brownian, small_grid):
    # unit Brownian on (0, 1): the discrete fixed point is exactly x (1 - x)
    solution, _ = solve_banach(1.0, brownian, small_grid, tol_F=1e-16)
    tau = to_expected_duration(solution)
    x = small_grid.nodes
    for k in (0, 7, small_grid.n_t):
        np.testing.assert_allclose(tau.slices[k].values, x * (1 - x), atol=1e-8)
    assert tau.interp_space(0, 0.5) == pytest.approx(0.25, abs=1e-8)


def test_interp_space_boundary_and_linearity(brownian, small_grid):
    solution, _ = solve_banach(1.0, brownian, small_grid, tol_F=1e-12)
    assert solution.interp_space(0, small_grid.a) == 0.0
    assert solution.interp_space(0, small_grid.b) == 0.0
    x0, x1 = small_grid.nodes[3], small_grid.nodes[4]
    mid = solution.interp_space(0, 0.5 * (x0 + x1))
    v = solution.initial_values()
    assert mid == pytest.approx(0.5 * (v[3] + v[4]), rel=1e-12)


# --- weak-form probes ---------------------------------------------------------------


def test_h1_norm_hand_value():
    g = SpaceTimeGrid(0.0, 1.0, 3, 4, 1.0)
    v = np.array([1.0, 1.0, 1.0])
    # gradient part: two boundary jumps of slope 4 -> 2 * 16 * 0.25 = 8
    assert h1_norm_sq(v, g) == pytest.approx(8.0 + 0.25 * 3.0)


def test_bilinear_form_pure_diffusion(brownian):
    g = SpaceTimeGrid(0.0, 1.0, 199, 8, 1.0)
    phi = np.sin(math.pi * g.nodes)
    # B[phi, phi] = 1/2 int (phi')^2 = pi^2 / 4 for sigma = 1; the uniform
    # node weights miss the two boundary half-cells, an O(h) deficit
    assert bilinear_form(phi, phi, 0.0, brownian, g) == pytest.approx(
        math.pi**2 / 4.0, rel=2e-2
    )
    assert bilinear_form(np.zeros(199), phi, 0.0, brownian, g) == 0.0


def test_coercivity_probe_diffusion_scaling():
    g = SpaceTimeGrid(0.0, 1.0, 49, 8, 1.0)
    base = coercivity_probe(make_forced_brownian(sigma=1.0, period=1.0), g, seed=3)
    scaled = coercivity_probe(make_forced_brownian(sigma=2.0, period=1.0), g, seed=3)
    assert base > 0.0
    assert scaled == pytest.approx(4.0 * base, rel=1e-12)


def test_coercivity_probe_lowest_mode_floor(brownian):
    # ratio for the continuum lowest mode: (pi^2 / 2) / (1 + pi^2); the
    # quadrature sits a few percent below it (missing boundary half-cells)
    g = SpaceTimeGrid(0.0, 1.0, 99, 8, 1.0)
    alpha = coercivity_probe(brownian, g)
    assert alpha == pytest.approx(0.5 * math.pi**2 / (1 + math.pi**2), rel=5e-2)


def test_coercivity_probe_time_dependent_drift_keeps_floor():
    # drift 0.5 cos(2 pi t) with sigma = 0.6 on (0, 1): the x-independent
    # drift term nearly cancels in B[phi, phi], leaving the diffusion floor
    sde = make_forced_brownian(forcing_amplitude=0.5, forcing_omega=2 * math.pi, sigma=0.6)
    g = SpaceTimeGrid(0.0, 1.0, 99, 16, 1.0)
    alpha = coercivity_probe(sde, g)
    assert alpha >= 0.09  # min(sigma^2/4, sigma^2 pi^2/4) for this interval


def test_coercivity_probe_may_be_nonpositive_for_strong_drift(duffing):
    # the double well is drift-dominated at sigma = 0.285; the probe is
    # informative, not a guarantee, and may legitimately go nonpositive
    g = SpaceTimeGrid(-1.0, 3.0, 60, 64, duffing.period)
    alpha = coercivity_probe(duffing, g, n_fields=16, n_times=4)
    assert math.isfinite(alpha)
    assert alpha < 0.5


# --- residual and spectrum ------------------------------------------------------------


def manual_solution(values_fn, grid):
    slices = [Field(values_fn(k), k * grid.dt) for k in range(grid.n_t + 1)]
    return PeriodicSolution(slices, grid, SolutionMeta("manual", 0, 0.0))


def test_residual_of_zero_field_is_one(brownian, small_grid):
    tau = manual_solution(lambda k: np.zeros(15), small_grid)
    assert verify_pde_residual(tau, brownian, small_grid) == 1.0


def test_residual_of_exact_quadratic_is_roundoff(brownian, small_grid):
    x = small_grid.nodes
    tau = manual_solution(lambda k: x * (1 - x), small_grid)
    assert verify_pde_residual(tau, brownian, small_grid) <= 1e-10


def test_residual_first_order_in_time(forced_brownian):
    values = []
    for n_t in (16, 32):
        g = SpaceTimeGrid(0.0, 1.0, 199, n_t, 1.0)
        solution, _ = solve_banach(1.0, forced_brownian, g, tol_F=1e-14)
        values.append(verify_pde_residual(to_expected_duration(solution), forced_brownian, g))
    assert values[0] / values[1] == pytest.approx(2.0, rel=0.35)


def test_spectral_radius_matches_exact_formula(brownian):
    g = SpaceTimeGrid(0.0, 1.0, 31, 16, 1.0)
    assert period_spectral_radius(brownian, g) == pytest.approx(
        brownian_rho(g), rel=1e-9
    )


def test_spectral_radius_strictly_inside_unit_disc(duffing, duffing_coarse_grid):
    rho = period_spectral_radius(duffing, duffing_coarse_grid, n_iter=10)
    assert 0.0 < rho < 1.0
