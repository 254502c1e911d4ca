"""Noise-amplitude tuning for periodically forced transition times.

For the double-well problem the quantity of interest is the expected
right-to-left transition time tau(0, x) read from the periodic PDE
solution at a reference point (x = 1, the right well bottom).  Sweeping
the noise amplitude produces the tuning curve; the resonance condition
picks the amplitude whose transition time equals half the forcing
period, so hops synchronise with the forcing.

For odd forcing-free drifts the left-to-right transition needs no extra
solve: flipping space and shifting time by half a period maps one
transition into the other, so the reverse curve is a reflection of the
computed one (anchored at initial time T/2).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretize import SpaceTimeGrid
from .errors import ExitTimeError, NoBracket, SymmetryUnavailable
from .model import DissipativityCertificate, PeriodicSDE1D, is_odd_drift
from .periodic import (
    PeriodicSolution,
    solve_banach,
    solve_direct,
    solve_gradient,
    to_expected_duration,
)

__all__ = [
    "SweepEntry",
    "SweepResult",
    "ResonanceResult",
    "solve_transition",
    "transition_time_right_to_left",
    "left_to_right_duration",
    "sweep_sigma",
    "find_resonance",
]


@dataclass(frozen=True)
class SweepEntry:
    sigma: float
    tau: float
    converged: bool
    iterations: int
    message: str = ""


@dataclass(frozen=True)
class SweepResult:
    entries: list[SweepEntry]
    x_eval: float
    method: str

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma for e in self.entries])

    @property
    def taus(self) -> np.ndarray:
        return np.array([e.tau for e in self.entries])


@dataclass(frozen=True)
class ResonanceResult:
    sigma_star: float
    bracket_low: float
    bracket_high: float
    target: float
    evaluations: list[tuple[float, float]]


def _solve(method: str, sde: PeriodicSDE1D, grid: SpaceTimeGrid, tol_F: float, max_iter: int):
    if method == "banach":
        return solve_banach(1.0, sde, grid, tol_F=tol_F, max_iter=max_iter)[0]
    if method == "gradient":
        return solve_gradient(1.0, sde, grid, tol_F=tol_F, max_iter=max_iter)[0]
    if method == "direct":
        return solve_direct(1.0, sde, grid)
    raise ValueError(f"unknown solver method {method!r}")


def solve_transition(
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    method: str = "banach",
    tol_F: float = 1e-5,
    max_iter: int = 200,
) -> PeriodicSolution:
    """Expected exit duration solution (f = 1) in duration orientation."""
    return to_expected_duration(_solve(method, sde, grid, tol_F, max_iter))


def transition_time_right_to_left(
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    x_eval: float = 1.0,
    method: str = "banach",
    tol_F: float = 1e-5,
    max_iter: int = 200,
) -> float:
    """tau(0, x_eval) on the truncated domain, linearly interpolated."""
    if not grid.a < x_eval < grid.b:
        raise ValueError(f"evaluation point {x_eval} outside ({grid.a}, {grid.b})")
    tau = solve_transition(sde, grid, method, tol_F, max_iter)
    return tau.interp_space(0, x_eval)


def left_to_right_duration(
    x: float,
    right_to_left_solution: PeriodicSolution,
    sde: PeriodicSDE1D,
    tol: float = 1e-9,
) -> float:
    """Reverse transition time by reflection, anchored at initial time T/2.

    Valid when the forcing-free drift is odd: flipping space and shifting
    the clock by half a period turns the left-to-right exit problem on
    the mirrored domain into the solved right-to-left one, so the value
    is read at -x from the s = 0 slice.
    """
    if not is_odd_drift(sde, tol=tol):
        raise SymmetryUnavailable(
            "reflection shortcut needs an odd forcing-free drift; none declared "
            "or oddness check failed"
        )
    grid = right_to_left_solution.grid
    if not grid.a < -x < grid.b:
        raise ValueError(
            f"reflected point {-x} outside computational interval ({grid.a}, {grid.b})"
        )
    return right_to_left_solution.interp_space(0, -x)


def _sweep_one(
    sigma: float,
    sde_factory: Callable[[float], PeriodicSDE1D],
    grid: SpaceTimeGrid,
    x_eval: float,
    method: str,
    tol_F: float,
    max_iter: int,
    certificate_fn: Callable[[float], DissipativityCertificate] | None,
) -> SweepEntry:
    sde = sde_factory(sigma)
    if certificate_fn is not None:
        cert = certificate_fn(sigma)
        if cert.R_star > max(abs(grid.a), abs(grid.b)):
            warnings.warn(
                f"sigma={sigma}: truncation radius {cert.R_star:.3f} exceeds the "
                f"fixed interval ({grid.a}, {grid.b}); truncation error may grow",
                stacklevel=2,
            )
    try:
        tau = solve_transition(sde, grid, method, tol_F, max_iter)
    except ExitTimeError as exc:
        return SweepEntry(sigma, float("nan"), False, 0, str(exc))
    return SweepEntry(
        sigma, tau.interp_space(0, x_eval), True, tau.meta.iterations
    )


def sweep_sigma(
    sigmas,
    sde_factory: Callable[[float], PeriodicSDE1D],
    grid: SpaceTimeGrid,
    x_eval: float = 1.0,
    method: str = "banach",
    tol_F: float = 1e-5,
    max_iter: int = 200,
    threads: int = 1,
    certificate_fn: Callable[[float], DissipativityCertificate] | None = None,
) -> SweepResult:
    """Transition time at x_eval for each noise amplitude.

    Entries come back sorted by sigma with per-entry convergence flags;
    a failed solve marks its entry instead of aborting the sweep.  With
    ``certificate_fn`` each amplitude gets its own truncation-radius
    check against the fixed interval (warning only).
    """
    order = sorted(float(s) for s in sigmas)
    args = (sde_factory, grid, x_eval, method, tol_F, max_iter, certificate_fn)
    if threads > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_sweep_one, s, *args) for s in order]
            entries = [f.result() for f in futures]
    else:
        entries = [_sweep_one(s, *args) for s in order]
    return SweepResult(entries, x_eval, method)


def find_resonance(
    target: float,
    bracket: tuple[float, float],
    sde_factory: Callable[[float], PeriodicSDE1D],
    grid: SpaceTimeGrid,
    x_eval: float = 1.0,
    method: str = "banach",
    tol_F: float = 1e-5,
    max_iter: int = 200,
    tol_sigma: float = 5e-4,
) -> ResonanceResult:
    """Bisect the noise amplitude until tau(0, x_eval) crosses ``target``.

    The transition time decreases in sigma, so the bracket must produce
    values on opposite sides of the target; non-monotone samples along
    the way only warn.  Returns the bracket midpoint once the bracket is
    narrower than ``tol_sigma``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"bracket must be increasing, got ({lo}, {hi})")

    evaluations: list[tuple[float, float]] = []

    def tau_at(sigma: float) -> float:
        sde = sde_factory(sigma)
        tau = solve_transition(sde, grid, method, tol_F, max_iter)
        value = tau.interp_space(0, x_eval)
        evaluations.append((sigma, value))
        return value

    tau_lo = tau_at(lo)
    tau_hi = tau_at(hi)
    if (tau_lo - target) * (tau_hi - target) > 0:
        raise NoBracket(
            f"target {target} not bracketed: tau({lo}) = {tau_lo}, "
            f"tau({hi}) = {tau_hi}"
        )
    while hi - lo > tol_sigma:
        mid = 0.5 * (lo + hi)
        tau_mid = tau_at(mid)
        if not min(tau_lo, tau_hi) <= tau_mid <= max(tau_lo, tau_hi):
            warnings.warn(
                f"non-monotone sample: tau({mid}) = {tau_mid} outside "
                f"[{min(tau_lo, tau_hi)}, {max(tau_lo, tau_hi)}]",
                stacklevel=2,
            )
        if (tau_mid - target) * (tau_lo - target) > 0:
            lo, tau_lo = mid, tau_mid
        else:
            hi, tau_hi = mid, tau_mid
    return ResonanceResult(0.5 * (lo + hi), lo, hi, target, evaluations)
