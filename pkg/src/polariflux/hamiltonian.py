"""Position-space Hamiltonian assembly for one or two molecules in a cavity.

The light-matter interaction is g(phi) (a^dag + a) sigma_x with
g(phi) = epsilon * omega_c * mu_ab(phi). In the quadrature representation
(a^dag + a) = sqrt(2 omega_c) x, so the grid off-diagonal carries
V_ab(phi) + g(phi) sqrt(2 omega_c) x. With this convention the Fock-basis
ladder (polariton module), the two-level Rabi oracle and the spectral grid
all describe the same physics: the avoided crossing opened at a resonance
angle has gap 2 g(phi) to first order, and the dipole self-energy correction
is g(phi)^2 / omega_c on both diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, Wavefunction, apply_kinetic
from .model import CavitySetup, DiabaticModel, eval_diabatic


def coupling_strength(model: DiabaticModel, cavity: CavitySetup, phi):
    """g(phi) = epsilon * omega_c * mu_ab(phi), in hartree."""
    _, _, _, mu = eval_diabatic(model, phi)
    return cavity.epsilon * cavity.omega_c * mu


@dataclass(frozen=True)
class PotentialField:
    """Per-grid-point potential matrix, stored as diagonals plus couplings.

    For one molecule the matrix at (x, phi) is
        [[v_a(phi) + h(x) + dse(phi),  v_ab(phi) + lam(phi) x],
         [v_ab(phi) + lam(phi) x,      v_b(phi) + h(x) + dse(phi)]]
    with h(x) = omega_c^2 x^2 / 2 and lam(phi) = g(phi) sqrt(2 omega_c).
    For two molecules the 4x4 matrix over the product basis {aa, ab, ba, bb}
    is M(phi1) (x) I + I (x) M(phi2) + h(x) I4, single flips only.
    """

    grid: Grid
    mass: float
    omega_c: float
    n_molecules: int
    include_dse: bool
    v_a: np.ndarray        # (n_phi,)
    v_b: np.ndarray        # (n_phi,)
    v_ab: np.ndarray       # (n_phi,)
    lam: np.ndarray        # (n_phi,), g(phi) * sqrt(2 omega_c)
    dse: np.ndarray        # (n_phi,), g(phi)^2/omega_c if enabled else zeros
    harmonic_x: np.ndarray  # (n_x,), omega_c^2 x^2 / 2

    def diagonal(self):
        """Diagonal entries, shape (n_elec, n_x, n_phi[, n_phi2])."""
        h = self.harmonic_x
        if self.n_molecules == 1:
            diag = np.empty(self.grid.shape)
            diag[0] = h[:, None] + (self.v_a + self.dse)[None, :]
            diag[1] = h[:, None] + (self.v_b + self.dse)[None, :]
            return diag
        va1 = (self.v_a + self.dse)[None, :, None]
        vb1 = (self.v_b + self.dse)[None, :, None]
        va2 = (self.v_a + self.dse)[None, None, :]
        vb2 = (self.v_b + self.dse)[None, None, :]
        hx = h[:, None, None]
        diag = np.empty(self.grid.shape)
        diag[0] = hx + va1 + va2   # aa
        diag[1] = hx + va1 + vb2   # ab
        diag[2] = hx + vb1 + va2   # ba
        diag[3] = hx + vb1 + vb2   # bb
        return diag

    def off_diagonal(self, molecule=1):
        """Single-flip coupling for the given molecule.

        Returns an array broadcastable over the spatial axes: the flip of
        molecule i carries v_ab(phi_i) + lam(phi_i) x.
        """
        x = self.grid.x
        if self.n_molecules == 1:
            return self.v_ab[None, :] + self.lam[None, :] * x[:, None]
        if molecule == 1:
            return (self.v_ab[None, :, None]
                    + self.lam[None, :, None] * x[:, None, None])
        return (self.v_ab[None, None, :]
                + self.lam[None, None, :] * x[:, None, None])


def _field_ingredients(model, cavity, grid):
    va, vb, vab, mu = eval_diabatic(model, grid.phi)
    g = cavity.epsilon * cavity.omega_c * mu
    lam = g * np.sqrt(2.0 * cavity.omega_c)
    dse = g ** 2 / cavity.omega_c if cavity.include_dse else np.zeros_like(g)
    harmonic = 0.5 * cavity.omega_c ** 2 * grid.x ** 2
    return va, vb, vab, lam, dse, harmonic


def assemble_single(model: DiabaticModel, cavity: CavitySetup, grid: Grid):
    if grid.n_molecules != 1:
        raise ValueError("assemble_single requires a one-molecule grid")
    va, vb, vab, lam, dse, harmonic = _field_ingredients(model, cavity, grid)
    return PotentialField(grid, model.mass, cavity.omega_c, 1,
                          cavity.include_dse, va, vb, vab, lam, dse, harmonic)


def assemble_pair(model: DiabaticModel, cavity: CavitySetup, grid: Grid):
    """Two identical molecules sharing the cavity mode, no direct interaction."""
    if cavity.n_molecules != 2 or grid.n_molecules != 2:
        raise ValueError("assemble_pair requires n_molecules = 2")
    va, vb, vab, lam, dse, harmonic = _field_ingredients(model, cavity, grid)
    return PotentialField(grid, model.mass, cavity.omega_c, 2,
                          cavity.include_dse, va, vb, vab, lam, dse, harmonic)


def apply_potential(field: PotentialField, amps):
    """Pointwise matrix-vector product of the field with the electronic axis."""
    out = field.diagonal() * amps
    if field.n_molecules == 1:
        off = field.off_diagonal()
        out[0] += off * amps[1]
        out[1] += off * amps[0]
        return out
    off1 = field.off_diagonal(1)
    off2 = field.off_diagonal(2)
    # molecule-1 flips: aa<->ba, ab<->bb; molecule-2 flips: aa<->ab, ba<->bb
    out[0] += off1 * amps[2] + off2 * amps[1]
    out[1] += off1 * amps[3] + off2 * amps[0]
    out[2] += off1 * amps[0] + off2 * amps[3]
    out[3] += off1 * amps[1] + off2 * amps[2]
    return out


def apply_hamiltonian(field: PotentialField, psi: Wavefunction):
    """H psi = (T_N + p^2/2) psi + V psi."""
    if psi.amps.shape != field.grid.shape:
        raise ValueError("wavefunction does not match the field grid")
    kin = apply_kinetic(psi, field.mass)
    kin.amps += apply_potential(field, psi.amps)
    return kin


def energy_expectation(field: PotentialField, psi: Wavefunction):
    hpsi = apply_hamiltonian(field, psi)
    return float((np.vdot(psi.amps, hpsi.amps) * psi.grid.volume_element).real)
