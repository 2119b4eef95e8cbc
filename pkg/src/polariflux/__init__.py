"""Coupled electron-nuclear-photon wavepacket dynamics in an optical cavity."""

from .model import (
    CavitySetup,
    DiabaticModel,
    RunConfig,
    SurrogateParams,
    build_cavity,
    build_model,
    build_surrogate,
    eval_diabatic,
    load_tabulated,
    parse_config,
    to_atomic_units,
)
from .grid import Grid, GridSpec, Wavefunction, build_grid, fock_function, inner_product
from .hamiltonian import assemble_pair, assemble_single, apply_hamiltonian, coupling_strength

__all__ = [
    "CavitySetup",
    "DiabaticModel",
    "Grid",
    "GridSpec",
    "RunConfig",
    "SurrogateParams",
    "Wavefunction",
    "apply_hamiltonian",
    "assemble_pair",
    "assemble_single",
    "build_cavity",
    "build_grid",
    "build_model",
    "build_surrogate",
    "coupling_strength",
    "eval_diabatic",
    "fock_function",
    "inner_product",
    "load_tabulated",
    "parse_config",
    "to_atomic_units",
]

__version__ = "0.1.0"
