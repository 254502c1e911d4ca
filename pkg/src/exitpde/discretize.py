"""Finite-difference layer: grids, tridiagonal operators, implicit sweeps.

Space is a uniform interior lattice of the truncated exit interval with
homogeneous Dirichlet boundaries (absorption); time is a uniform lattice
over one period.  The generator  L = b d/dx + (a/2) d2/dx2  (a = sigma^2)
is discretised with central differences; nodes whose cell Peclet number
|b| h / a exceeds the advisory bound fall back to one-sided drift
differencing so the implicit system stays an M-matrix there.  Backward
Euler in time keeps every step unconditionally stable.

Three operator flavours are assembled from the same coefficients:

* ``generator``  L(s), used for residual checks,
* ``reversed``   L(T - s), driving the time-reversed sweep,
* ``adjoint``    the Fokker-Planck operator L*(s) in divergence form,
  whose rows coincide exactly with the transpose of the L(s) matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from scipy.linalg import solve_banded

from .errors import EllipticityViolated, NoDecay, OffLattice, SingularSystem
from .model import PeriodicSDE1D

__all__ = [
    "SpaceTimeGrid",
    "Field",
    "TridiagonalOperator",
    "default_time_steps",
    "assemble_generator",
    "step_backward_euler",
    "evolve_phi",
    "apply_period_operator",
    "evolve_w",
    "survival_duration",
    "peclet_number",
    "advection_cfl",
    "PECLET_ADVISORY",
]

# Central drift differencing keeps the implicit matrix an M-matrix only
# while |b| h / a stays below this bound; beyond it assembly switches the
# offending nodes to one-sided differences.
PECLET_ADVISORY = 2.0

Inhomogeneity = None | float | Callable


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform lattice: n_x interior nodes on (a, b), n_t steps per period."""

    a: float
    b: float
    n_x: int
    n_t: int
    period: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")
        if self.n_x < 3:
            raise ValueError("n_x must be at least 3")
        if self.n_t < 1:
            raise ValueError("n_t must be at least 1")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError("period must be positive and finite")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_x + 1)

    @property
    def dt(self) -> float:
        return self.period / self.n_t

    @cached_property
    def nodes(self) -> np.ndarray:
        """Interior nodes a + h, ..., b - h."""
        return self.a + self.h * np.arange(1, self.n_x + 1)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t + 1)

    def time_index(self, s: float) -> int:
        """Lattice index of a time, or OffLattice if s = k dt fails."""
        k = s / self.dt
        rounded = round(k)
        if abs(k - rounded) > 1e-8 * max(1.0, abs(k)):
            raise OffLattice(f"time {s} is not on the lattice with dt={self.dt}")
        return int(rounded)

    def l2_norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm with uniform weight h."""
        return math.sqrt(self.h * float(np.sum(np.square(values))))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return self.h * float(np.dot(u, v))


def default_time_steps(period: float) -> int:
    """Steps-per-period rule used by the reproduction configs: floor(2 T)."""
    return max(1, int(math.floor(2.0 * period)))


@dataclass(frozen=True)
class Field:
    """Grid function on the interior nodes, tagged with its time."""

    values: np.ndarray
    time_label: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class TridiagonalOperator:
    """Tridiagonal matrix: lower[i], diag[i], upper[i] act on rows i.

    lower[0] and upper[-1] are kept at zero; Dirichlet boundaries are
    baked in by truncation.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    time_label: float
    kind: str

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = self.diag * values
        out[1:] += self.lower[1:] * values[:-1]
        out[:-1] += self.upper[:-1] * values[1:]
        return out


OperatorKind = Literal["generator", "reversed", "adjoint"]


def _coefficients(sde: PeriodicSDE1D, t: float, grid: SpaceTimeGrid):
    x = grid.nodes
    b = np.broadcast_to(np.asarray(sde.drift(t, x), dtype=float), x.shape).copy()
    sig = np.broadcast_to(np.asarray(sde.diffusion(t, x), dtype=float), x.shape)
    a = np.square(sig)
    if np.any(a <= 0.0):
        raise EllipticityViolated(
            f"sigma(t, x)^2 not strictly positive at t={t} "
            f"(min {float(a.min()):.3e})"
        )
    return b, a


def _generator_bands(b: np.ndarray, a: np.ndarray, h: float):
    lower = a / (2 * h * h) - b / (2 * h)
    diag = -a / (h * h)
    upper = a / (2 * h * h) + b / (2 * h)
    mask = np.abs(b) * h / a > PECLET_ADVISORY
    if mask.any():
        bp = np.maximum(b[mask], 0.0)
        bm = np.minimum(b[mask], 0.0)
        lower[mask] = a[mask] / (2 * h * h) - bm / h
        diag[mask] = -a[mask] / (h * h) - (bp - bm) / h
        upper[mask] = a[mask] / (2 * h * h) + bp / h
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper


def assemble_generator(
    sde: PeriodicSDE1D,
    s: float,
    grid: SpaceTimeGrid,
    kind: OperatorKind = "generator",
) -> TridiagonalOperator:
    """Assemble L(s), L(T - s), or the divergence-form adjoint L*(s).

    The adjoint rows equal the transpose of the L(s) matrix exactly, so
    discrete duality  <Phi phi, w> = <phi, W w>  holds to roundoff when
    the sweeps pair their time labels accordingly.
    """
    t = sde.period - s if kind == "reversed" else s
    b, a = _coefficients(sde, t, grid)
    lower, diag, upper = _generator_bands(b, a, grid.h)
    if kind == "adjoint":
        lo = np.zeros_like(lower)
        up = np.zeros_like(upper)
        lo[1:] = upper[:-1]
        up[:-1] = lower[1:]
        lower, upper = lo, up
    return TridiagonalOperator(lower, diag, upper, s, kind)


def _implicit_solve(op: TridiagonalOperator, dt: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - dt Op) v = rhs via the banded tridiagonal routine."""
    n = rhs.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * op.upper[:-1]
    ab[1, :] = 1.0 - dt * op.diag
    ab[2, :-1] = -dt * op.lower[1:]
    try:
        return solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"implicit step at t={op.time_label} failed: {exc}") from exc


def _eval_inhom(f: Inhomogeneity, s: float, grid: SpaceTimeGrid):
    if f is None:
        return 0.0
    if callable(f):
        return np.asarray(f(s, grid.nodes), dtype=float)
    return float(f)


def step_backward_euler(
    field: Field,
    s_next: float,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    kind: OperatorKind = "reversed",
    inhom: Inhomogeneity = None,
) -> Field:
    """One implicit step  (I - dt Op(s_next)) v_next = v + dt f(s_next).

    Coefficients and inhomogeneity sit at the new time level, matching
    backward Euler.
    """
    dt = grid.dt
    if abs((field.time_label + dt) - s_next) > 1e-8 * max(1.0, abs(s_next)):
        raise OffLattice(
            f"step from {field.time_label} to {s_next} does not match dt={dt}"
        )
    op = assemble_generator(sde, s_next, grid, kind)
    rhs = field.values + dt * _eval_inhom(inhom, s_next, grid)
    return Field(_implicit_solve(op, dt, rhs), s_next)


def evolve_phi(
    initial: Field,
    r: float,
    s: float,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
) -> Field:
    """Homogeneous reversed evolution Phi(r, s): advance from time r to s."""
    k0, k1 = grid.time_index(r), grid.time_index(s)
    if not 0 <= k0 <= k1 <= grid.n_t:
        raise OffLattice(f"need 0 <= r <= s <= period on the lattice, got ({r}, {s})")
    if abs(initial.time_label - r) > 1e-8 * max(1.0, abs(r)):
        raise OffLattice(f"initial field labelled {initial.time_label}, expected {r}")
    v = initial.values.copy()
    dt = grid.dt
    for m in range(k0 + 1, k1 + 1):
        op = assemble_generator(sde, m * dt, grid, "reversed")
        v = _implicit_solve(op, dt, v)
    return Field(v, s)


def apply_period_operator(
    phi: np.ndarray,
    f: Inhomogeneity,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    store: bool = False,
):
    """One inhomogeneous reversed sweep over a full period:  A phi.

    Returns the final values; with ``store`` also the list of every time
    slice including the initial one (n_t + 1 arrays).
    """
    v = np.array(phi, dtype=float, copy=True)
    slices = [v.copy()] if store else None
    dt = grid.dt
    for m in range(1, grid.n_t + 1):
        s = m * dt
        op = assemble_generator(sde, s, grid, "reversed")
        rhs = v + dt * _eval_inhom(f, s, grid)
        v = _implicit_solve(op, dt, rhs)
        if store:
            slices.append(v.copy())
    if store:
        return v, slices
    return v


def evolve_w(
    w0: np.ndarray,
    s: float,
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
) -> Field:
    """Advance the absorbing Fokker-Planck equation from time 0 to s.

    Each implicit step from t to t + dt evaluates the adjoint at the old
    level t: the reversed sweep uses the new level, and transposing that
    product reverses factor order, so old-level evaluation here makes the
    one-period map W(0, T) the exact transpose of Phi(0, T).
    """
    k1 = grid.time_index(s)
    if not 0 <= k1 <= grid.n_t:
        raise OffLattice(f"need 0 <= s <= period on the lattice, got {s}")
    w = np.array(w0, dtype=float, copy=True)
    dt = grid.dt
    for m in range(k1):
        op = assemble_generator(sde, m * dt, grid, "adjoint")
        w = _implicit_solve(op, dt, w)
    return Field(w, s)


def survival_duration(
    sde: PeriodicSDE1D,
    grid: SpaceTimeGrid,
    s: float,
    x_index: int,
    tail_tol: float = 1e-6,
    max_periods: int = 50,
) -> float:
    """Expected exit duration via the survival probability, one node.

    Starts a discrete delta (mass 1/h at node ``x_index``) at time s,
    advances the absorbing Fokker-Planck density across periods, and
    accumulates integral G dt of the survival mass by the trapezoidal
    rule until G falls below ``tail_tol``.  Independent of the periodic
    solvers; used to cross-check them.
    """
    if not 0 <= x_index < grid.n_x:
        raise IndexError(f"x_index {x_index} outside 0..{grid.n_x - 1}")
    k0 = grid.time_index(s)
    w = np.zeros(grid.n_x)
    w[x_index] = 1.0 / grid.h
    dt = grid.dt
    mass = grid.h * float(np.sum(w))  # exactly 1 at start
    integral = 0.0
    max_steps = max_periods * grid.n_t
    for step in range(max_steps):
        # wrap the coefficient clock; the lattice is period-aligned
        m = (k0 + step) % grid.n_t
        op = assemble_generator(sde, m * dt, grid, "adjoint")
        w = _implicit_solve(op, dt, w)
        new_mass = grid.h * float(np.sum(w))
        integral += 0.5 * dt * (mass + new_mass)
        mass = new_mass
        if mass < tail_tol:
            return integral
    raise NoDecay(
        f"survival mass still {mass:.3e} >= {tail_tol} after {max_periods} periods"
    )


def peclet_number(sde: PeriodicSDE1D, grid: SpaceTimeGrid, n_t_samples: int = 32) -> float:
    """Advisory max |b| h / a over nodes and sampled lattice times."""
    worst = 0.0
    for t in np.linspace(0.0, sde.period, n_t_samples, endpoint=False):
        b, a = _coefficients(sde, float(t), grid)
        worst = max(worst, float(np.max(np.abs(b) * grid.h / a)))
    return worst


def advection_cfl(sde: PeriodicSDE1D, grid: SpaceTimeGrid, n_t_samples: int = 32) -> float:
    """Advisory dt max|b| / h; implicit stepping tolerates large values."""
    worst = 0.0
    for t in np.linspace(0.0, sde.period, n_t_samples, endpoint=False):
        b, _ = _coefficients(sde, float(t), grid)
        worst = max(worst, float(np.max(np.abs(b))) * grid.dt / grid.h)
    return worst
