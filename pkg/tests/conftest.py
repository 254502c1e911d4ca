"""Shared fixtures: cheap model instances and grids reused across files."""

import math

import pytest

from exitpde import (
    SpaceTimeGrid,
    make_duffing,
    make_forced_brownian,
    make_periodic_ou,
)


@pytest.fixture(scope="session")
def brownian():
    """Autonomous unit-noise Brownian motion, period fixed at 1."""
    return make_forced_brownian(sigma=1.0, period=1.0)


@pytest.fixture(scope="session")
def brownian_grid():
    return SpaceTimeGrid(0.0, 1.0, 99, 16, 1.0)


@pytest.fixture(scope="session")
def forced_brownian():
    """Brownian motion plus the time-only drift 0.5 cos(2 pi t)."""
    return make_forced_brownian(forcing_amplitude=0.5, forcing_omega=2 * math.pi, sigma=1.0)


@pytest.fixture(scope="session")
def toy_ou():
    """Mean-reverting toy with period 1; transition times are O(1)."""
    return make_periodic_ou(
        pull=1.0, forcing_amplitude=0.2, forcing_omega=2 * math.pi, sigma=1.0
    )


@pytest.fixture(scope="session")
def toy_ou_factory():
    def factory(sigma: float):
        return make_periodic_ou(
            pull=1.0, forcing_amplitude=0.2, forcing_omega=2 * math.pi, sigma=sigma
        )

    return factory


@pytest.fixture(scope="session")
def toy_ou_grid():
    return SpaceTimeGrid(-1.0, 1.0, 60, 40, 1.0)


@pytest.fixture(scope="session")
def duffing():
    return make_duffing()


@pytest.fixture(scope="session")
def duffing_coarse_grid(duffing):
    """Small space-time lattice for the double-well; dt is coarse but the
    discrete identities under test hold at any resolution."""
    return SpaceTimeGrid(-1.0, 3.0, 120, 314, duffing.period)
