"""
Shared lattice fixtures. Everything runs on tiny lattices so the exact backend
stays fast.
"""

import numpy as np
import pytest

from yangfeldman_mcp.api.ccr_algebra import CCRAlgebra
from yangfeldman_mcp.api.lattice import build_lattice
from yangfeldman_mcp.api.propagators import build_propagators
from yangfeldman_mcp.api.types import LatticeConfig


@pytest.fixture(scope="session")
def small_lattice():
    return build_lattice(LatticeConfig(nt=6, nx=4, dt=0.5, dx=1.0, mass=1.0))


@pytest.fixture(scope="session")
def tiny_lattice():
    return build_lattice(LatticeConfig(nt=4, nx=4, dt=0.5, dx=1.0, mass=1.0))


@pytest.fixture(scope="session")
def bump_lattice():
    return build_lattice(
        LatticeConfig(nt=10, nx=4, dt=0.5, dx=1.0, mass=1.0, epsilon=0.1,
                      h_profile="time_bump", h_center=2.25, h_width=1.5)
    )


@pytest.fixture(scope="session")
def two_slice_lattice():
    return build_lattice(LatticeConfig(nt=2, nx=3, dt=0.5, dx=1.0, mass=1.0))


@pytest.fixture(scope="session")
def float_propagators(small_lattice):
    return build_propagators(small_lattice)


@pytest.fixture(scope="session")
def exact_propagators(tiny_lattice):
    return build_propagators(tiny_lattice, "exact")


@pytest.fixture(scope="session")
def exact_algebra(exact_propagators):
    return CCRAlgebra(exact_propagators)


@pytest.fixture(scope="session")
def float_algebra(float_propagators):
    return CCRAlgebra(float_propagators)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
