"""Independent truth references for the grid engine.

`dense_build` materializes the same Hamiltonian that `apply_hamiltonian`
applies matrix-free (spectral kinetic blocks + pointwise potential) as an
explicit Hermitian matrix on a coarse grid, so exact propagation by
eigendecomposition can cross-check the split-operator integrator. The
closed-form two-level Rabi and harmonic-center references validate the
cavity machinery against textbook results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, Wavefunction
from .hamiltonian import PotentialField

DENSE_DIMENSION_CAP = 4096


class DimensionCapError(ValueError):
    """Flattened basis too large for dense eigendecomposition."""


def spectral_second_derivative(n, length):
    """Dense matrix of the periodic spectral d^2/dq^2 on n uniform points.

    Built column-by-column through the same FFT stack the propagator uses,
    so the two representations agree to roundoff.
    """
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    cols = np.fft.ifft(-(k[:, None] ** 2) * np.fft.fft(np.eye(n), axis=0), axis=0)
    return cols.real


@dataclass
class DenseProblem:
    matrix: np.ndarray
    grid: Grid
    eigvals: np.ndarray = field(default=None, repr=False)
    eigvecs: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eigensystem(self):
        if self.eigvals is None:
            self.eigvals, self.eigvecs = np.linalg.eigh(self.matrix)
        return self.eigvals, self.eigvecs


def dense_build(field_: PotentialField):
    """Explicit Hamiltonian over the flattened (electronic, x, phi...) basis."""
    grid = field_.grid
    dim = int(np.prod(grid.shape))
    if dim > DENSE_DIMENSION_CAP:
        raise DimensionCapError(
            f"flattened dimension {dim} exceeds cap {DENSE_DIMENSION_CAP}"
        )
    n_x, n_phi = grid.spec.n_x, grid.spec.n_phi
    d2x = spectral_second_derivative(n_x, 2 * grid.spec.x_half_width)
    d2p = spectral_second_derivative(n_phi, 2 * np.pi)
    ix = np.eye(n_x)
    ip = np.eye(n_phi)

    if grid.n_molecules == 1:
        t_spatial = -0.5 * np.kron(d2x, ip) - np.kron(ix, d2p) / (2 * field_.mass)
        n_elec, spatial = 2, n_x * n_phi
        kin = np.kron(np.eye(n_elec), t_spatial)
    else:
        t_spatial = (
            -0.5 * np.kron(np.kron(d2x, ip), ip)
            - np.kron(np.kron(ix, d2p), ip) / (2 * field_.mass)
            - np.kron(np.kron(ix, ip), d2p) / (2 * field_.mass)
        )
        n_elec, spatial = 4, n_x * n_phi * n_phi
        kin = np.kron(np.eye(n_elec), t_spatial)

    h = kin
    diag = field_.diagonal().reshape(n_elec, spatial)
    for k in range(n_elec):
        idx = slice(k * spatial, (k + 1) * spatial)
        h[idx, idx] += np.diag(diag[k])

    def add_off(block_row, block_col, values):
        r = slice(block_row * spatial, (block_row + 1) * spatial)
        c = slice(block_col * spatial, (block_col + 1) * spatial)
        h[r, c] += np.diag(values)
        h[c, r] += np.diag(values)

    if grid.n_molecules == 1:
        off = np.broadcast_to(field_.off_diagonal(), (n_x, n_phi)).reshape(-1)
        add_off(0, 1, off)
    else:
        shape3 = (n_x, n_phi, n_phi)
        off1 = np.broadcast_to(field_.off_diagonal(1), shape3).reshape(-1)
        off2 = np.broadcast_to(field_.off_diagonal(2), shape3).reshape(-1)
        add_off(0, 2, off1)   # aa <-> ba
        add_off(1, 3, off1)   # ab <-> bb
        add_off(0, 1, off2)   # aa <-> ab
        add_off(2, 3, off2)   # ba <-> bb

    return DenseProblem(h, grid)


def dense_apply(problem: DenseProblem, psi: Wavefunction):
    flat = problem.matrix @ psi.amps.reshape(-1)
    return Wavefunction(flat.reshape(problem.grid.shape), problem.grid)


def dense_propagate(problem: DenseProblem, psi0: Wavefunction, t):
    """psi(t) = U exp(-i Lambda t) U^dag psi0 from the cached eigensystem."""
    vals, vecs = problem.eigensystem()
    coeff = vecs.conj().T @ psi0.amps.reshape(-1)
    flat = vecs @ (np.exp(-1j * vals * t) * coeff)
    return Wavefunction(flat.reshape(problem.grid.shape), problem.grid)


def dense_ground_state(problem: DenseProblem):
    vals, vecs = problem.eigensystem()
    psi = Wavefunction(vecs[:, 0].astype(complex).reshape(problem.grid.shape),
                       problem.grid)
    # quadrature-normalize (eigh gives unit vector norm)
    return psi.normalize(), float(vals[0])


def rabi_reference(g, detuning, t):
    """Two-level population transfer (P_up, P_down) starting from 'up'.

    P_down(t) = g^2/(g^2 + detuning^2/4) * sin^2(sqrt(g^2 + detuning^2/4) t).
    """
    t = np.asarray(t, dtype=float)
    omega = np.sqrt(g**2 + 0.25 * detuning**2)
    if omega == 0:
        down = np.zeros_like(t)
    else:
        down = (g**2 / omega**2) * np.sin(omega * t) ** 2
    return 1.0 - down, down


def harmonic_reference(omega, x0, t):
    """Coherent-state center of a harmonic mode: x0 cos(omega t)."""
    return x0 * np.cos(omega * np.asarray(t, dtype=float))
