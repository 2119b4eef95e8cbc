import numpy as np
import pytest

from polariflux.model import (
    HARTREE_PER_EV,
    CavitySetup,
    SurrogateParams,
    build_surrogate,
)
from polariflux.grid import GridSpec, build_grid, default_x_half_width

OMEGA_C_DEFAULT = 1.35 * HARTREE_PER_EV


@pytest.fixture(scope="session")
def surrogate():
    return build_surrogate()


@pytest.fixture(scope="session")
def cavity():
    return CavitySetup(omega_c=OMEGA_C_DEFAULT, epsilon=0.04)


@pytest.fixture(scope="session")
def small_grid():
    spec = GridSpec(n_phi=64, n_x=48, x_half_width=default_x_half_width(OMEGA_C_DEFAULT))
    return build_grid(spec)


@pytest.fixture(scope="session")
def default_grid():
    spec = GridSpec(n_phi=199, n_x=150, x_half_width=default_x_half_width(OMEGA_C_DEFAULT))
    return build_grid(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
