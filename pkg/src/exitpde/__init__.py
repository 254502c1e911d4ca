"""Expected exit times of periodically forced one-dimensional diffusions.

Two independent routes to the same quantity: a periodic-in-time backward
PDE solve on a space-time lattice (``discretize``, ``periodic``) and a
direct Euler-Maruyama Monte Carlo estimate (``simulate``), with a
survival-probability quadrature as a third cross-check.  ``resonance``
tunes the noise amplitude so the mean transition time matches half the
forcing period, and ``cli`` exposes everything as subcommands of the
``exitpde`` entry point.
"""
from .errors import (
    ConfigError,
    DissipativityUnbounded,
    EllipticityViolated,
    ExitTimeError,
    IllConditioned,
    NoBracket,
    NoDecay,
    NonFinitePath,
    NotConverged,
    OffLattice,
    SingularSystem,
    StepCollapse,
    SymmetryUnavailable,
)
from .model import (
    DissipativityCertificate,
    ExitDomain,
    Harmonic,
    PeriodicSDE1D,
    PeriodicityReport,
    PolyHarmonic,
    SDE_FAMILIES,
    check_periodicity,
    diffusion_sup,
    dissipativity_coefficients,
    duffing_dissipativity_bound,
    is_odd_drift,
    make_duffing,
    make_forced_brownian,
    make_periodic_ou,
    make_polynomial,
    make_sde,
    ou_dissipativity_bound,
    truncation_radius,
)
from .discretize import (
    Field,
    PECLET_ADVISORY,
    SpaceTimeGrid,
    TridiagonalOperator,
    advection_cfl,
    apply_period_operator,
    assemble_generator,
    default_time_steps,
    evolve_phi,
    evolve_w,
    peclet_number,
    step_backward_euler,
    survival_duration,
)
from .periodic import (
    PeriodicSolution,
    SolutionMeta,
    SolverReport,
    bilinear_form,
    coercivity_probe,
    cost_F,
    gradient_F,
    h1_norm_sq,
    period_spectral_radius,
    solve_banach,
    solve_direct,
    solve_gradient,
    to_expected_duration,
    verify_pde_residual,
)
from .simulate import (
    EpsilonEstimate,
    ExitStatistics,
    McConfig,
    MomentBounds,
    estimate_epsilon,
    estimate_expected_exit_curve,
    moment_bounds,
    path_rng,
    simulate_exit_duration,
)
from .resonance import (
    ResonanceResult,
    SweepEntry,
    SweepResult,
    find_resonance,
    left_to_right_duration,
    solve_transition,
    sweep_sigma,
    transition_time_right_to_left,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DissipativityUnbounded",
    "EllipticityViolated",
    "ExitTimeError",
    "IllConditioned",
    "NoBracket",
    "NoDecay",
    "NonFinitePath",
    "NotConverged",
    "OffLattice",
    "SingularSystem",
    "StepCollapse",
    "SymmetryUnavailable",
    "DissipativityCertificate",
    "ExitDomain",
    "Harmonic",
    "PeriodicSDE1D",
    "PeriodicityReport",
    "PolyHarmonic",
    "SDE_FAMILIES",
    "check_periodicity",
    "diffusion_sup",
    "dissipativity_coefficients",
    "duffing_dissipativity_bound",
    "is_odd_drift",
    "make_duffing",
    "make_forced_brownian",
    "make_periodic_ou",
    "make_polynomial",
    "make_sde",
    "ou_dissipativity_bound",
    "truncation_radius",
    "Field",
    "PECLET_ADVISORY",
    "SpaceTimeGrid",
    "TridiagonalOperator",
    "advection_cfl",
    "apply_period_operator",
    "assemble_generator",
    "default_time_steps",
    "evolve_phi",
    "evolve_w",
    "peclet_number",
    "step_backward_euler",
    "survival_duration",
    "PeriodicSolution",
    "SolutionMeta",
    "SolverReport",
    "bilinear_form",
    "coercivity_probe",
    "cost_F",
    "gradient_F",
    "h1_norm_sq",
    "period_spectral_radius",
    "solve_banach",
    "solve_direct",
    "solve_gradient",
    "to_expected_duration",
    "verify_pde_residual",
    "EpsilonEstimate",
    "ExitStatistics",
    "McConfig",
    "MomentBounds",
    "estimate_epsilon",
    "estimate_expected_exit_curve",
    "moment_bounds",
    "path_rng",
    "simulate_exit_duration",
    "ResonanceResult",
    "SweepEntry",
    "SweepResult",
    "find_resonance",
    "left_to_right_duration",
    "solve_transition",
    "sweep_sigma",
    "transition_time_right_to_left",
    "__version__",
]
