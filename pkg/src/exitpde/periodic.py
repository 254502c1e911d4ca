"""Periodic solutions of the reversed exit-time problem.

The expected exit duration solves  du/ds + L(s) u = -f  with absorption
on the boundary and u periodic in s.  After time reversal v(s) = u(T - s)
the problem becomes a forward parabolic equation whose one-period affine
map  A phi = Phi(0, T) phi + Duhamel(f)  is a contraction; its unique
fixed point v0 yields u.  Three independent routes to v0 are provided:

* ``solve_banach``   fixed-point iteration v <- A v,
* ``solve_gradient`` descent on F(phi) = 1/2 ||A phi - phi||^2 with the
  adjoint-state gradient  W(0, T) w0 - w0,  w0 = A phi - phi,
* ``solve_direct``   dense solve of (I - Phi(0, T)) v0 = A 0.

All three stop criteria and reports are phrased through the same cost F,
so cross-checking them is meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from . import discretize
from .discretize import (
    Field,
    Inhomogeneity,
    SpaceTimeGrid,
    advection_cfl,
    apply_period_operator,
    assemble_generator,
    evolve_w,
    peclet_number,
)
from .errors import IllConditioned, NotConverged, StepCollapse
from .model import PeriodicSDE1D

__all__ = [
    "SolutionMeta",
    "PeriodicSolution",
    "SolverReport",
    "cost_F",
    "gradient_F",
    "solve_banach",
    "solve_gradient",
    "solve_direct",
    "to_expected_duration",
    "bilinear_form",
    "h1_norm_sq",
    "coercivity_probe",
    "verify_pde_residual",
    "period_spectral_radius",
]


@dataclass(frozen=True)
class SolutionMeta:
    solver: str
    iterations: int
    final_cost: float


@dataclass(frozen=True)
class PeriodicSolution:
    """Full space-time store of one periodic sweep: n_t + 1 time slices."""

    slices: list[Field]
    grid: SpaceTimeGrid
    meta: SolutionMeta

    def initial_values(self) -> np.ndarray:
        return self.slices[0].values

    def final_values(self) -> np.ndarray:
        return self.slices[-1].values

    def periodicity_residual(self) -> float:
        """L2 distance between the first and last slices."""
        return self.grid.l2_norm(self.final_values() - self.initial_values())

    def interp_space(self, k: int, x: float) -> float:
        """Linear interpolation of slice k at x, zero at the boundaries."""
        g = self.grid
        xs = np.concatenate(([g.a], g.nodes, [g.b]))
        vs = np.concatenate(([0.0], self.slices[k].values, [0.0]))
        return float(np.interp(x, xs, vs))


@dataclass
class SolverReport:
    cost_history: list[float]
    contraction_estimates: list[float]
    converged: bool
    tolerance_used: float
    guidance: dict[str, float] = dataclass_field(default_factory=dict)


def cost_F(phi: np.ndarray, f: Inhomogeneity, sde: PeriodicSDE1D, grid: SpaceTimeGrid) -> float:
    """F(phi) = 1/2 || A phi - phi ||_L2^2; zero exactly at the fixed point."""
    residual = apply_period_operator(phi, f, sde, grid) - np.asarray(phi, dtype=float)
    return 0.5 * grid.l2_norm(residual) ** 2


def _gradient_from_residual(w0: np.ndarray, sde: PeriodicSDE1D, grid: SpaceTimeGrid) -> np.ndarray:
    return evolve_w(w0, grid.period, sde, grid).values - w0


def gradient_F(phi: np.ndarray, f: Inhomogeneity, sde: PeriodicSDE1D, grid: SpaceTimeGrid) -> np.ndarray:
    """Adjoint-state gradient of F:  W(0, T) w0 - w0 with w0 = A phi - phi.

    W(0, T) is the one-period absorbing Fokker-Planck map; with the
    paired time conventions it is the exact transpose of Phi(0, T), so
    this matches central finite differences of cost_F to roundoff.
    """
    w0 = apply_period_operator(phi, f, sde, grid) - np.asarray(phi, dtype=float)
    return _gradient_from_residual(w0, sde, grid)


def _advisories(sde: PeriodicSDE1D, grid: SpaceTimeGrid) -> dict[str, float]:
    return {
        "peclet": peclet_number(sde, grid),
        "advection_cfl": advection_cfl(sde, grid),
    }


def _finalize(
    v0: np.ndarray,
    f: Inhomogeneity,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    solver: str,
    iterations: int,
) -> tuple[PeriodicSolution, float]:
    """Final sweep from v0 storing every slice; reports the cost it attests."""
    _, raw = apply_period_operator(v0, f, sde, grid, store=True)
    dt = grid.dt
    slices = [Field(vals, k * dt) for k, vals in enumerate(raw)]
    final_cost = 0.5 * grid.l2_norm(raw[-1] - raw[0]) ** 2
    meta = SolutionMeta(solver, iterations, final_cost)
    return PeriodicSolution(slices, grid, meta), final_cost


def solve_banach(
    f: Inhomogeneity,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    tol_F: float = 1e-5,
    max_iter: int = 200,
) -> tuple[PeriodicSolution, SolverReport]:
    """Fixed-point iteration v <- A v from v = 0 until F(v) <= tol_F."""
    report = SolverReport([], [], False, tol_F, _advisories(sde, grid))
    v = np.zeros(grid.n_x)
    prev_step = None
    for _ in range(max_iter):
        av = apply_period_operator(v, f, sde, grid)
        step_norm = grid.l2_norm(av - v)
        cost = 0.5 * step_norm**2
        report.cost_history.append(cost)
        if prev_step is not None and prev_step > 0:
            report.contraction_estimates.append(step_norm / prev_step)
        prev_step = step_norm
        if cost <= tol_F:
            report.converged = True
            solution, _ = _finalize(v, f, sde, grid, "banach", len(report.cost_history))
            return solution, report
        v = av
    raise NotConverged(
        f"fixed-point iteration: F = {report.cost_history[-1]:.3e} > {tol_F} "
        f"after {max_iter} iterations",
        report,
    )


def _inhom_nonnegative(f: Inhomogeneity, sde: PeriodicSDE1D, grid: SpaceTimeGrid) -> bool:
    if f is None:
        return True
    if callable(f):
        times = np.linspace(0.0, sde.period, 17)
        return all(float(np.min(np.asarray(f(s, grid.nodes)))) >= 0.0 for s in times)
    return float(f) >= 0.0


# fraction of the first-order decrease a trial step must realise; 1/10 is
# loose enough to accept every well-scaled step on a convex quadratic
_ARMIJO_SLOPE = 0.1


def solve_gradient(
    f: Inhomogeneity,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    tol_F: float = 1e-5,
    max_iter: int = 500,
    step0: float = 1.0,
    step_growth: float = 2.0,
    step_floor: float = 1e-12,
    start: np.ndarray | None = None,
) -> tuple[PeriodicSolution, SolverReport]:
    """Adaptive-step gradient descent on F.

    Accepted steps grow the step size, rejected ones halve it.  A step is
    accepted only on sufficient decrease (Armijo): a bare strict decrease
    would let overlong steps crawl along the quadratic instead of forcing
    the backtrack to the well-scaled one.  For nonnegative f each iterate
    is projected onto the nonnegative cone (the fixed point lies there by
    the maximum principle).  The strict convexity of F makes the start
    immaterial; it defaults to zero.
    """
    report = SolverReport([], [], False, tol_F, _advisories(sde, grid))
    project = _inhom_nonnegative(f, sde, grid)
    v = np.zeros(grid.n_x) if start is None else np.array(start, dtype=float)
    if v.shape != (grid.n_x,):
        raise ValueError(f"start must have shape ({grid.n_x},), got {v.shape}")
    if project:
        v = np.clip(v, 0.0, None)
    w0 = apply_period_operator(v, f, sde, grid) - v
    res_norm = grid.l2_norm(w0)
    cost = 0.5 * res_norm**2
    report.cost_history.append(cost)
    gamma = step0
    for _ in range(max_iter):
        if cost <= tol_F:
            report.converged = True
            solution, _ = _finalize(v, f, sde, grid, "gradient", len(report.cost_history))
            return solution, report
        grad = _gradient_from_residual(w0, sde, grid)
        while True:
            trial = v - gamma * grad
            if project:
                np.clip(trial, 0.0, None, out=trial)
            w0_trial = apply_period_operator(trial, f, sde, grid) - trial
            trial_norm = grid.l2_norm(w0_trial)
            trial_cost = 0.5 * trial_norm**2
            # projected-gradient Armijo: <grad, v - trial> is gamma |grad|^2
            # when nothing clips and shrinks with the clipped coordinates
            progress = grid.inner(grad, v - trial)
            if progress > 0.0 and trial_cost <= cost - _ARMIJO_SLOPE * progress:
                v, w0 = trial, w0_trial
                report.cost_history.append(trial_cost)
                if res_norm > 0:
                    report.contraction_estimates.append(trial_norm / res_norm)
                res_norm, cost = trial_norm, trial_cost
                gamma *= step_growth
                break
            gamma *= 0.5
            if gamma < step_floor:
                raise StepCollapse(
                    f"step size {gamma:.3e} below floor with F = {cost:.3e}", report
                )
    raise NotConverged(
        f"gradient descent: F = {cost:.3e} > {tol_F} after {max_iter} iterations",
        report,
    )


def solve_direct(
    f: Inhomogeneity,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    max_n_x: int = 2000,
    cond_limit: float = 1e12,
) -> PeriodicSolution:
    """Dense one-period solve:  (I - Phi(0, T)) v0 = A 0.

    Builds Phi(0, T) by sweeping the identity matrix column-by-column
    through the homogeneous problem, so memory and work scale with
    n_x^2; guarded to modest grids.
    """
    n = grid.n_x
    if n > max_n_x:
        raise ValueError(f"dense build limited to n_x <= {max_n_x}, got {n}")
    duhamel = apply_period_operator(np.zeros(n), f, sde, grid)
    phi_matrix = np.eye(n)
    dt = grid.dt
    for m in range(1, grid.n_t + 1):
        op = assemble_generator(sde, m * dt, grid, "reversed")
        phi_matrix = discretize._implicit_solve(op, dt, phi_matrix)
    system = np.eye(n) - phi_matrix
    cond = float(np.linalg.cond(system))
    if not math.isfinite(cond) or cond > cond_limit:
        raise IllConditioned(f"cond(I - Phi) = {cond:.3e} exceeds {cond_limit:.1e}")
    v0 = np.linalg.solve(system, duhamel)
    solution, _ = _finalize(v0, f, sde, grid, "direct", 1)
    return solution


def to_expected_duration(solution: PeriodicSolution) -> PeriodicSolution:
    """Undo the time reversal:  tau(s, x) = v(T - s, x).

    Applying it twice returns the original slices, so it also converts
    an expected-duration solution back to the reversed orientation.
    """
    grid = solution.grid
    dt = grid.dt
    n_t = grid.n_t
    slices = [Field(solution.slices[n_t - k].values, k * dt) for k in range(n_t + 1)]
    return PeriodicSolution(slices, grid, solution.meta)


def _field_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, one-sided at the first/last interior node."""
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    d[0] = (values[1] - values[0]) / h
    d[-1] = (values[-1] - values[-2]) / h
    return d


def h1_norm_sq(values: np.ndarray, grid: SpaceTimeGrid) -> float:
    """||phi||^2_{H1_0}: L2 part plus forward differences with boundary zeros."""
    padded = np.concatenate(([0.0], values, [0.0]))
    grad_sq = float(np.sum(np.square(np.diff(padded) / grid.h))) * grid.h
    l2_sq = grid.h * float(np.sum(np.square(values)))
    return l2_sq + grad_sq


def bilinear_form(
    phi: np.ndarray,
    psi: np.ndarray,
    s: float,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
) -> float:
    """Weak form of the reversed operator at time s.

    B[phi, psi; s] = -int btilde(T-s) phi' psi + 1/2 int a(T-s) phi' psi'
    with btilde = b + da/dx; trapezoid-style uniform weights.
    """
    t = sde.period - s
    x = grid.nodes
    b = np.broadcast_to(np.asarray(sde.drift(t, x), dtype=float), x.shape)
    sig = np.broadcast_to(np.asarray(sde.diffusion(t, x), dtype=float), x.shape)
    a = np.square(sig)
    btilde = b + _field_derivative(a, grid.h)
    dphi = _field_derivative(np.asarray(phi, dtype=float), grid.h)
    dpsi = _field_derivative(np.asarray(psi, dtype=float), grid.h)
    drift_part = -grid.h * float(np.sum(btilde * dphi * np.asarray(psi, dtype=float)))
    diff_part = 0.5 * grid.h * float(np.sum(a * dphi * dpsi))
    return drift_part + diff_part


def _probe_fields(grid: SpaceTimeGrid, n_fields: int, seed: int) -> list[np.ndarray]:
    """Smooth random sine combinations, always including the lowest mode."""
    rng = np.random.default_rng(seed)
    width = grid.b - grid.a
    rel = (grid.nodes - grid.a) / width
    modes = [np.sin(k * math.pi * rel) for k in range(1, 13)]
    fields = [modes[0]]
    for _ in range(max(0, n_fields - 1)):
        coeffs = rng.standard_normal(len(modes)) / (1.0 + np.arange(len(modes))) ** 2
        fields.append(sum(c * m for c, m in zip(coeffs, modes)))
    return fields


def coercivity_probe(
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    n_fields: int = 64,
    n_times: int = 16,
    seed: int = 0,
) -> float:
    """Empirical coercivity constant of the reversed weak form.

    alpha_hat = min over random unit-H1_0 fields and lattice times of
    B[phi, phi; s].  A positive value certifies the e^(-alpha_hat T)
    contraction bound; strongly drift-dominated problems may legitimately
    probe nonpositive.
    """
    stride = max(1, grid.n_t // n_times)
    times = [k * grid.dt for k in range(0, grid.n_t, stride)]
    worst = math.inf
    for phi in _probe_fields(grid, n_fields, seed):
        norm_sq = h1_norm_sq(phi, grid)
        if norm_sq <= 0:
            continue
        for s in times:
            worst = min(worst, bilinear_form(phi, phi, s, sde, grid) / norm_sq)
    return worst


def verify_pde_residual(
    tau: PeriodicSolution,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    f: Inhomogeneity = 1.0,
) -> float:
    """Max abs of  du/ds + L(s) u + f  over interior lattice times.

    Centered differences in s on the expected-duration orientation;
    the first and last slices are skipped (no centered neighbour).
    """
    dt = grid.dt
    worst = 0.0
    for k in range(1, grid.n_t):
        s = k * dt
        op = assemble_generator(sde, s, grid, "generator")
        dds = (tau.slices[k + 1].values - tau.slices[k - 1].values) / (2 * dt)
        residual = dds + op.apply(tau.slices[k].values) + discretize._eval_inhom(f, s, grid)
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def period_spectral_radius(
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    n_iter: int = 25,
    seed: int = 0,
) -> float:
    """Power-iteration estimate of the spectral radius of Phi(0, T)."""
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(grid.n_x)
    y /= grid.l2_norm(y)
    estimate = 0.0
    for _ in range(n_iter):
        z = apply_period_operator(y, None, sde, grid)
        norm = grid.l2_norm(z)
        if norm == 0.0:
            return 0.0
        estimate = norm
        y = z / norm
    return estimate
