"""Model layer: time-periodic one-dimensional SDEs and exit domains.

An SDE  dX = b(t, X) dt + sigma(t, X) dW  with T-periodic coefficients is
described by plain callables plus, optionally, a structured polynomial +
harmonic form that downstream code can compile into fast kernels.  The
module also carries the bookkeeping needed before any solve starts:
periodicity checks, weak-dissipativity constants, truncation radii for
unbounded exit intervals, and the odd-drift test used by the reflection
shortcut for reverse transitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DissipativityUnbounded

__all__ = [
    "Harmonic",
    "PolyHarmonic",
    "PeriodicSDE1D",
    "ExitDomain",
    "PeriodicityReport",
    "DissipativityCertificate",
    "check_periodicity",
    "dissipativity_coefficients",
    "duffing_dissipativity_bound",
    "ou_dissipativity_bound",
    "truncation_radius",
    "is_odd_drift",
    "diffusion_sup",
    "make_duffing",
    "make_periodic_ou",
    "make_forced_brownian",
    "make_polynomial",
    "SDE_FAMILIES",
    "make_sde",
]


@dataclass(frozen=True)
class Harmonic:
    """Scalar forcing  amplitude * cos(omega * t + phase)."""

    amplitude: float
    omega: float
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)


@dataclass(frozen=True)
class PolyHarmonic:
    """Coefficient of the form  poly(x) + harmonic(t).

    ``poly`` holds ascending power-series coefficients (c0, c1, ...).
    The harmonic part is optional; without it the coefficient is
    autonomous.  Instances are callables (t, x) -> array and broadcast
    like numpy ufuncs, so they can be used directly as drift/diffusion
    fields of :class:`PeriodicSDE1D`.
    """

    poly: tuple[float, ...]
    forcing: Harmonic | None = None

    def __call__(self, t, x):
        out = npoly.polyval(np.asarray(x, dtype=float), np.asarray(self.poly, dtype=float))
        if self.forcing is not None:
            out = out + self.forcing(t)
        return out


@dataclass(frozen=True)
class PeriodicSDE1D:
    """One-dimensional SDE with T-periodic coefficients.

    Parameters
    ----------
    drift, diffusion : callables (t, x) -> array
        Coefficient fields; must broadcast over numpy arguments.
    period : float
        Common period T of both coefficients.
    ellipticity : float
        Declared lower bound for sigma(t, x)^2 on the working domain.
        Purely informational here; operator assembly re-checks nodewise.
    drift_form, diffusion_form : PolyHarmonic, optional
        Structured forms enabling the compiled Monte Carlo kernel.  When
        provided they must describe the same functions as the callables.
    base_drift : callable, optional
        Drift with the periodic forcing removed, used by symmetry checks.
    """

    drift: Callable
    diffusion: Callable
    period: float
    ellipticity: float = 0.0
    drift_form: PolyHarmonic | None = None
    diffusion_form: PolyHarmonic | None = None
    base_drift: Callable | None = None

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive and finite, got {self.period}")


@dataclass(frozen=True)
class ExitDomain:
    """Open interval D = (left, right); infinite endpoints allowed.

    Infinite sides must be truncated (see :func:`truncation_radius`)
    before a grid can be built; ``truncation_left``/``truncation_right``
    record the artificial endpoints chosen for that purpose.
    """

    left: float
    right: float
    truncation_left: float | None = None
    truncation_right: float | None = None

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError(f"need left < right, got ({self.left}, {self.right})")
        for name in ("truncation_left", "truncation_right"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"{name} must be finite")

    @property
    def effective_left(self) -> float:
        return self.truncation_left if math.isinf(self.left) else self.left

    @property
    def effective_right(self) -> float:
        return self.truncation_right if math.isinf(self.right) else self.right

    def bounds(self) -> tuple[float, float]:
        """Finite computational interval; raises if a side is still open."""
        lo, hi = self.effective_left, self.effective_right
        if lo is None or hi is None or not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("domain has an untruncated infinite side")
        if not lo < hi:
            raise ValueError(f"truncated interval empty: ({lo}, {hi})")
        return lo, hi

    def contains(self, x: float) -> bool:
        lo, hi = self.bounds()
        return lo < x < hi


@dataclass(frozen=True)
class PeriodicityReport:
    """Outcome of sampling |coef(t, x) - coef(t + T, x)| on a lattice."""

    periodic: bool
    drift_deviation: float
    diffusion_deviation: float
    tol: float

    def __bool__(self) -> bool:
        return self.periodic


@dataclass(frozen=True)
class DissipativityCertificate:
    """Weak-dissipativity constants and the radii derived from them.

    r_star bounds the ball the process rarely leaves; R_star is the
    safety-scaled truncation radius that the computational interval must
    cover on any artificial side.
    """

    c: float
    lam: float
    sigma_sup: float
    r_star: float
    R_star: float


def check_periodicity(
    sde: PeriodicSDE1D,
    sample_box: tuple[tuple[float, float], tuple[float, float]],
    tol: float = 1e-9,
    n_samples: int = 33,
) -> PeriodicityReport:
    """Verify both coefficients are T-periodic on a sample lattice.

    ``sample_box`` is ((t_lo, t_hi), (x_lo, x_hi)).  At least a 32 x 32
    lattice is sampled; the report carries the worst deviations found.
    """
    n = max(int(n_samples), 32)
    (t0, t1), (x0, x1) = sample_box
    ts = np.linspace(t0, t1, n).reshape(-1, 1)
    xs = np.linspace(x0, x1, n).reshape(1, -1)
    dev_b = float(np.max(np.abs(sde.drift(ts, xs) - sde.drift(ts + sde.period, xs))))
    dev_s = float(np.max(np.abs(sde.diffusion(ts, xs) - sde.diffusion(ts + sde.period, xs))))
    return PeriodicityReport(dev_b <= tol and dev_s <= tol, dev_b, dev_s, tol)


def dissipativity_coefficients(
    sde: PeriodicSDE1D,
    lam: float,
    probe_radius: float = 8.0,
    n_x: int = 1025,
    n_t: int = 64,
) -> tuple[float, float]:
    """Sampled supremum c of  2 x b(t, x) + lam x^2  for a chosen lam.

    The supremum is taken over one period in t and |x| <= R, with R
    doubled twice; if the sup keeps growing with R the drift is not
    weakly dissipative for this lam and the probe fails.

    Returns
    -------
    (c, lam) : tuple of floats
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    ts = np.linspace(0.0, sde.period, n_t, endpoint=False).reshape(-1, 1)
    sups = []
    for radius in (probe_radius, 2 * probe_radius, 4 * probe_radius):
        xs = np.linspace(-radius, radius, n_x).reshape(1, -1)
        sups.append(float(np.max(2.0 * xs * sde.drift(ts, xs) + lam * xs * xs)))
    growth = 1e-9 * max(1.0, abs(sups[0]))
    if sups[2] > sups[1] + growth and sups[1] > sups[0] + growth:
        raise DissipativityUnbounded(
            f"sampled supremum grows with radius: {sups}; drift not weakly "
            f"dissipative for lam={lam}"
        )
    return max(sups), lam


def duffing_dissipativity_bound(lam: float = 1.0, forcing_amplitude: float = 0.12) -> float:
    """Closed-form c for the forced double-well drift x - x^3 + A cos.

    Valid for lam in (0, 2); an upper bound for the sampled supremum.
    """
    if not 0 < lam < 2:
        raise ValueError("closed form requires 0 < lam < 2")
    return 1.0 / (2.0 - lam) + 2.0 * abs(forcing_amplitude) + lam / 4.0


def ou_dissipativity_bound(pull: float, forcing_sup: float) -> tuple[float, float]:
    """Closed-form (c, lam) for drift  S(t) - pull * x  with |S| <= forcing_sup."""
    if pull <= 0:
        raise ValueError("pull must be positive")
    return forcing_sup**2 / pull, pull


def truncation_radius(
    c: float,
    lam: float,
    sigma_sup: float,
    r_boundary: float,
    r_initial: float,
    safety: float = 2.0,
) -> DissipativityCertificate:
    """Truncation radii from weak-dissipativity constants.

    r_star = sqrt((c + sigma_sup^2) / lam); R_star = safety * max of
    r_star, the radius containing the finite exit boundary, and the
    radius containing the initial conditions.
    """
    if c < 0 or sigma_sup < 0:
        raise ValueError("c and sigma_sup must be nonnegative")
    if safety < 1:
        raise ValueError("safety factor below 1 would shrink the domain")
    if c == 0 and sigma_sup == 0:
        r_star = 0.0
    else:
        if lam <= 0:
            raise ValueError("lam must be positive")
        r_star = math.sqrt((c + sigma_sup**2) / lam)
    big = safety * max(r_star, r_boundary, r_initial)
    return DissipativityCertificate(c, lam, sigma_sup, r_star, big)


def is_odd_drift(
    sde: PeriodicSDE1D,
    forcing_free_drift: Callable | None = None,
    tol: float = 1e-9,
    sample_radius: float = 2.0,
    n_samples: int = 33,
) -> bool:
    """True when the forcing-free drift satisfies b0(t, -x) = -b0(t, x).

    Sampled over one period and |x| <= sample_radius.  The drift with
    the forcing removed defaults to ``sde.base_drift``.
    """
    b0 = forcing_free_drift if forcing_free_drift is not None else sde.base_drift
    if b0 is None:
        return False
    ts = np.linspace(0.0, sde.period, max(int(n_samples), 32)).reshape(-1, 1)
    xs = np.linspace(0.0, sample_radius, max(int(n_samples), 32)).reshape(1, -1)
    dev = float(np.max(np.abs(b0(ts, -xs) + b0(ts, xs))))
    return dev <= tol


def diffusion_sup(
    sde: PeriodicSDE1D,
    interval: tuple[float, float],
    n_x: int = 257,
    n_t: int = 64,
) -> float:
    """Sampled sup of |sigma(t, x)| over one period and an interval."""
    ts = np.linspace(0.0, sde.period, n_t, endpoint=False).reshape(-1, 1)
    xs = np.linspace(interval[0], interval[1], n_x).reshape(1, -1)
    return float(np.max(np.abs(sde.diffusion(ts, xs))))


# --- families -------------------------------------------------------------

def _build(drift_form, diffusion_form, period, base_poly=None):
    base = PolyHarmonic(base_poly) if base_poly is not None else None
    ell = 0.0
    if diffusion_form.forcing is None and len(diffusion_form.poly) == 1:
        ell = diffusion_form.poly[0] ** 2
    return PeriodicSDE1D(
        drift=drift_form,
        diffusion=diffusion_form,
        period=period,
        ellipticity=ell,
        drift_form=drift_form,
        diffusion_form=diffusion_form,
        base_drift=base,
    )


def make_duffing(
    forcing_amplitude: float = 0.12,
    forcing_omega: float = 1e-3,
    sigma: float = 0.285,
) -> PeriodicSDE1D:
    """Periodically forced double-well:  b = x - x^3 + A cos(omega t), additive noise."""
    if forcing_omega <= 0:
        raise ValueError("forcing_omega must be positive")
    poly = (0.0, 1.0, 0.0, -1.0)
    return _build(
        PolyHarmonic(poly, Harmonic(forcing_amplitude, forcing_omega)),
        PolyHarmonic((sigma,)),
        2 * math.pi / forcing_omega,
        base_poly=poly,
    )


def make_periodic_ou(
    pull: float = 1.0,
    forcing_amplitude: float = 1.0,
    forcing_omega: float = 1.0,
    sigma: float = 1.0,
    phase: float = 0.0,
) -> PeriodicSDE1D:
    """Mean-reverting drift with harmonic forcing:  b = A cos(omega t + phase) - pull * x."""
    if forcing_omega <= 0:
        raise ValueError("forcing_omega must be positive")
    poly = (0.0, -pull)
    return _build(
        PolyHarmonic(poly, Harmonic(forcing_amplitude, forcing_omega, phase)),
        PolyHarmonic((sigma,)),
        2 * math.pi / forcing_omega,
        base_poly=poly,
    )


def make_forced_brownian(
    forcing_amplitude: float = 0.0,
    forcing_omega: float = 0.0,
    sigma: float = 1.0,
    phase: float = 0.0,
    period: float | None = None,
) -> PeriodicSDE1D:
    """Brownian motion with a purely time-dependent periodic drift.

    With zero forcing the SDE is autonomous and ``period`` must be given
    explicitly (any T works; the solvers need some period to sweep).
    """
    if forcing_omega > 0:
        period = 2 * math.pi / forcing_omega if period is None else period
    elif period is None:
        raise ValueError("autonomous coefficients need an explicit period")
    forcing = Harmonic(forcing_amplitude, forcing_omega, phase) if forcing_amplitude else None
    return _build(
        PolyHarmonic((0.0,), forcing),
        PolyHarmonic((sigma,)),
        period,
        base_poly=(0.0,),
    )


def make_polynomial(
    poly: tuple[float, ...],
    sigma: float,
    forcing_amplitude: float = 0.0,
    forcing_omega: float = 0.0,
    phase: float = 0.0,
    period: float | None = None,
) -> PeriodicSDE1D:
    """User polynomial drift with optional harmonic forcing, additive noise."""
    if forcing_omega > 0:
        period = 2 * math.pi / forcing_omega if period is None else period
    elif period is None:
        raise ValueError("autonomous coefficients need an explicit period")
    forcing = Harmonic(forcing_amplitude, forcing_omega, phase) if forcing_amplitude else None
    return _build(
        PolyHarmonic(tuple(float(v) for v in poly), forcing),
        PolyHarmonic((sigma,)),
        period,
        base_poly=tuple(float(v) for v in poly),
    )


SDE_FAMILIES: dict[str, Callable[..., PeriodicSDE1D]] = {
    "duffing": make_duffing,
    "periodic_ou": make_periodic_ou,
    "forced_brownian": make_forced_brownian,
    "polynomial": make_polynomial,
}


def make_sde(family: str, params: dict) -> PeriodicSDE1D:
    """Instantiate a named SDE family with a parameter map."""
    try:
        factory = SDE_FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown SDE family {family!r}; available: {sorted(SDE_FAMILIES)}"
        ) from None
    return factory(**params)
