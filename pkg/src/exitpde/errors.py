"""Exception types shared across the package."""
from __future__ import annotations


class ExitTimeError(Exception):
    """Base class for all package-specific failures."""


class EllipticityViolated(ExitTimeError):
    """Squared diffusion is non-positive somewhere on the grid."""


class SingularSystem(ExitTimeError):
    """The implicit tridiagonal system could not be factorised."""


class OffLattice(ExitTimeError):
    """A requested time does not sit on the solver's time lattice."""


class NonFinitePath(ExitTimeError):
    """A simulated path produced NaN or infinity; reject the configuration."""


class NotConverged(ExitTimeError):
    """Iteration hit its budget before reaching tolerance."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class StepCollapse(ExitTimeError):
    """Adaptive step shrank below its floor without making progress."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class IllConditioned(ExitTimeError):
    """Dense one-period system too ill-conditioned to trust."""


class NoDecay(ExitTimeError):
    """Survival mass failed to fall below tolerance within the horizon."""


class SymmetryUnavailable(ExitTimeError):
    """Reflection shortcut requested for a drift that is not odd."""


class NoBracket(ExitTimeError):
    """Root finding requested on an interval that does not bracket the target."""


class DissipativityUnbounded(ExitTimeError):
    """Sampled dissipativity supremum keeps growing with the probe radius."""


class ConfigError(ExitTimeError):
    """Run configuration failed validation before any compute started."""
