"""Direct-product grids and wavefunctions for the torsion-photon problem.

Axes are ordered (electronic k, x, phi[, phi2]). The photon quadrature x
lives on a box [-W, W) and the torsional angle(s) on the periodic interval
[-pi, pi), both with uniform spacing and FFT-based spectral derivatives.
Quadrature weights are uniform (trapezoidal on the periodic angle is exact;
the box assumes vanishing amplitudes at the edge, which the harmonic photon
confinement guarantees for a large enough W).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .model import ConfigError

BOUNDARY_AMPLITUDE_LIMIT = 1e-6   # max |psi| at the x edge relative to global max


class BoundaryContaminationError(RuntimeError):
    """Amplitude at the x box edge too large; enlarge x_half_width."""


class FockTailError(ValueError):
    """Requested oscillator eigenfunction does not fit in the x box."""


@dataclass(frozen=True)
class GridSpec:
    """Grid sizes; phi spans [-pi, pi) periodic, x spans [-W, W)."""

    n_phi: int
    n_x: int
    x_half_width: float

    def __post_init__(self):
        if self.n_phi < 8 or self.n_x < 8:
            raise ConfigError("grid sizes must be >= 8")
        if not self.x_half_width > 0:
            raise ConfigError("x_half_width must be positive")


def default_x_half_width(omega_c):
    """Box covering Fock states through n~5 with tails below 1e-8."""
    return 9.0 / np.sqrt(omega_c)


@dataclass(frozen=True)
class Grid:
    spec: GridSpec
    n_molecules: int
    phi: np.ndarray      # (n_phi,)
    x: np.ndarray        # (n_x,)
    k_phi: np.ndarray    # integer harmonics, FFT order
    k_x: np.ndarray      # box wavenumbers, FFT order

    @property
    def dphi(self):
        return 2.0 * np.pi / self.spec.n_phi

    @property
    def dx(self):
        return 2.0 * self.spec.x_half_width / self.spec.n_x

    @property
    def n_elec(self):
        return 2 ** self.n_molecules

    @property
    def shape(self):
        return (self.n_elec, self.spec.n_x) + (self.spec.n_phi,) * self.n_molecules

    @property
    def volume_element(self):
        return self.dx * self.dphi ** self.n_molecules


def build_grid(spec: GridSpec, n_molecules: int = 1):
    """Coordinate arrays and spectral wavenumbers for the product grid."""
    if n_molecules not in (1, 2):
        raise ConfigError(f"n_molecules must be 1 or 2, got {n_molecules}")
    n_phi, n_x, w = spec.n_phi, spec.n_x, spec.x_half_width
    phi = -np.pi + np.arange(n_phi) * (2.0 * np.pi / n_phi)
    dx = 2.0 * w / n_x
    x = -w + np.arange(n_x) * dx
    k_phi = np.fft.fftfreq(n_phi, d=1.0 / n_phi)   # integer harmonics
    k_x = 2.0 * np.pi * np.fft.fftfreq(n_x, d=dx)
    return Grid(spec, n_molecules, phi, x, k_phi, k_x)


@dataclass
class Wavefunction:
    """Complex amplitudes over (electronic, x, phi[, phi2])."""

    amps: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.amps.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.amps.shape} != grid shape {self.grid.shape}"
            )
        if self.amps.dtype != np.complex128:
            self.amps = self.amps.astype(np.complex128)

    def copy(self):
        return Wavefunction(self.amps.copy(), self.grid)

    def norm2(self):
        return float(np.sum(np.abs(self.amps) ** 2).real * self.grid.volume_element)

    def norm(self):
        return float(np.sqrt(self.norm2()))

    def normalize(self):
        self.amps /= self.norm()
        return self

    def boundary_ratio(self):
        """Max |amplitude| on the two x-edge rows relative to the global max."""
        edge = max(np.abs(self.amps[:, 0]).max(), np.abs(self.amps[:, -1]).max())
        peak = np.abs(self.amps).max()
        return float(edge / peak) if peak > 0 else 0.0

    def check_boundary(self):
        ratio = self.boundary_ratio()
        if ratio > BOUNDARY_AMPLITUDE_LIMIT:
            raise BoundaryContaminationError(
                f"x-edge amplitude ratio {ratio:.3e} exceeds "
                f"{BOUNDARY_AMPLITUDE_LIMIT:.0e}; enlarge x_half_width"
            )


def inner_product(psi1: Wavefunction, psi2: Wavefunction):
    """<psi1|psi2> by quadrature; conjugate-symmetric."""
    if psi1.amps.shape != psi2.amps.shape:
        raise ValueError("wavefunction shapes differ")
    return complex(np.vdot(psi1.amps, psi2.amps) * psi1.grid.volume_element)


def _kinetic_factor(grid: Grid, mass):
    """(k_phi^2/2m + k_x^2/2) broadcast over (x, phi[, phi2])."""
    n_mol = grid.n_molecules
    kx2 = 0.5 * grid.k_x ** 2
    kphi2 = grid.k_phi ** 2 / (2.0 * mass)
    if n_mol == 1:
        return kx2[:, None] + kphi2[None, :]
    return kx2[:, None, None] + kphi2[None, :, None] + kphi2[None, None, :]


def apply_kinetic(psi: Wavefunction, mass):
    """(T_N + p^2/2) psi via forward/inverse FFT per electronic component."""
    grid = psi.grid
    axes = tuple(range(1, psi.amps.ndim))
    fk = np.fft.fftn(psi.amps, axes=axes)
    fk *= _kinetic_factor(grid, mass)[None]
    out = np.fft.ifftn(fk, axes=axes)
    return Wavefunction(out, grid)


def kinetic_expectation(psi: Wavefunction, mass):
    return inner_product(psi, apply_kinetic(psi, mass)).real


def fock_function(n, omega_c, x):
    """n-th harmonic-oscillator eigenfunction (unit mass, frequency omega_c).

    Uses the normalized three-term recurrence, stable to high n. Raises
    FockTailError if the function has not decayed below 1e-8 of its peak at
    the box edge.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, dtype=float)
    xi = np.sqrt(omega_c) * x
    h_prev = (omega_c / np.pi) ** 0.25 * np.exp(-0.5 * xi ** 2)
    if n == 0:
        h_n = h_prev
    else:
        h_n = np.sqrt(2.0) * xi * h_prev
        for k in range(1, n):
            h_next = np.sqrt(2.0 / (k + 1.0)) * xi * h_n - np.sqrt(k / (k + 1.0)) * h_prev
            h_prev, h_n = h_n, h_next
    tail = max(abs(h_n[0]), abs(h_n[-1]))
    if tail > 1e-8 * np.abs(h_n).max():
        raise FockTailError(
            f"fock_function({n}): boundary amplitude {tail:.3e} too large for the box"
        )
    return h_n


# --------------------------------------------------------------------------
# Checkpoint container: magic 'PLWF', version u32, dims u64 (n_elec first,
# 2 -> one molecule, 4 -> two), interleaved (re, im) f64, trailing f64 time.
# The 'PLRD' density container shares the layout with imaginary parts zero.
# --------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"PLWF"
DENSITY_MAGIC = b"PLRD"
CHECKPOINT_VERSION = 1


def write_checkpoint(path, psi: Wavefunction, time_au, magic=CHECKPOINT_MAGIC):
    dims = psi.amps.shape
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for d in dims:
            fh.write(struct.pack("<Q", d))
        inter = np.empty(psi.amps.size * 2, dtype="<f8")
        flat = psi.amps.reshape(-1)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())
        fh.write(struct.pack("<d", float(time_au)))


def read_checkpoint(path, grid: Grid | None = None, magic=CHECKPOINT_MAGIC):
    """Read a checkpoint; returns (amps or Wavefunction, time_au)."""
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise ValueError(f"{path}: bad magic {got!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (n_elec,) = struct.unpack("<Q", fh.read(8))
        n_spatial = {2: 2, 4: 3}.get(n_elec)
        if n_spatial is None:
            raise ValueError(f"{path}: unsupported electronic dimension {n_elec}")
        dims = [n_elec] + [struct.unpack("<Q", fh.read(8))[0] for _ in range(n_spatial)]
        count = int(np.prod(dims)) * 2
        inter = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
        (time_au,) = struct.unpack("<d", fh.read(8))
    amps = (inter[0::2] + 1j * inter[1::2]).reshape(dims)
    if grid is not None:
        return Wavefunction(amps, grid), time_au
    return amps, time_au
