"""Projection observables: adiabatic populations, densities, cis/trans tables.

Population analysis happens in the adiabatic electronic basis |g>, |e>
obtained by diagonalizing the 2x2 diabatic matrix at each angle, combined
with photon Fock projections along the cavity quadrature. The cis window is
|phi| >= phi_cut (cis sits at +-pi); a grid point exactly at the cut belongs
to cis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, Wavefunction, fock_function
from .model import DiabaticModel, eval_diabatic

CIS_CUT_DEFAULT = 1.63  # rad


def adiabatic_rotation(model: DiabaticModel, phi):
    """Rotation R[j, kappa, k]: adiabatic state kappa in the diabatic basis.

    The |g> row has positive overlap with the lower diabat at each angle;
    at the diabat crossing the branch follows continuity (vab > 0 keeps the
    eigenvectors nondegenerate there).
    """
    va, vb, vab, _ = eval_diabatic(model, phi)
    va = np.atleast_1d(va)
    vb = np.atleast_1d(vb)
    vab = np.atleast_1d(vab)
    delta = 0.5 * (va - vb)
    r = np.hypot(delta, vab)

    # stable lower-eigenvector components: (b-weight) = delta + r, written
    # as vab^2/(r - delta) where delta < 0 to avoid cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        gb = np.where(delta >= 0, delta + r, vab**2 / (r - delta))
    ga = -vab.copy()
    degenerate = (vab == 0)
    if np.any(degenerate):
        # exactly diagonal: lower adiabat coincides with the lower diabat
        ga = np.where(degenerate & (va <= vb), 1.0, ga)
        gb = np.where(degenerate & (va <= vb), 0.0, gb)
        ga = np.where(degenerate & (va > vb), 0.0, ga)
        gb = np.where(degenerate & (va > vb), 1.0, gb)
    norm = np.hypot(ga, gb)
    ga, gb = ga / norm, gb / norm

    # pointwise sign: positive component on the lower diabat
    lower_is_a = va < vb
    sign = np.where(lower_is_a, np.sign(ga), np.sign(gb))
    sign = np.where(sign == 0, 1.0, sign)
    ga, gb = ga * sign, gb * sign

    # |e> orthogonal, positive on the upper diabat
    ea, eb = gb, -ga
    upper_sign = np.where(lower_is_a, np.sign(eb), np.sign(ea))
    upper_sign = np.where(upper_sign == 0, 1.0, upper_sign)
    ea, eb = ea * upper_sign, eb * upper_sign

    rot = np.empty(va.shape + (2, 2))
    rot[..., 0, 0] = ga
    rot[..., 0, 1] = gb
    rot[..., 1, 0] = ea
    rot[..., 1, 1] = eb
    return rot


def adiabatic_transform(psi: Wavefunction, model: DiabaticModel, inverse=False):
    """Rotate the electronic axis to (from) the adiabatic basis; unitary."""
    grid = psi.grid
    rot = adiabatic_rotation(model, grid.phi)   # (n_phi, 2, 2)
    if inverse:
        rot = np.swapaxes(rot, -1, -2)
    if grid.n_molecules == 1:
        out = np.einsum("pKk,kxp->Kxp", rot, psi.amps)
        return Wavefunction(out, grid)
    amps = psi.amps.reshape((2, 2) + psi.amps.shape[1:])
    out = np.einsum("pKk,QLl,klxpQ->KLxpQ", rot, rot, amps)
    return Wavefunction(out.reshape(psi.amps.shape), grid)


@dataclass
class PopulationTable:
    """P_{kappa, n} with kappa in {g, e} and n <= n_max, plus the Fock tail."""

    probs: np.ndarray      # (2, n_max + 1)
    tail: float
    n_max: int
    tail_flagged: bool

    def __getitem__(self, key):
        kappa, n = key
        return self.probs[{"g": 0, "e": 1}[kappa], n]

    def labels(self):
        return [f"P_{k}{n}" for k in ("g", "e") for n in range(self.n_max + 1)]

    def values(self):
        return self.probs.reshape(-1)


def _fock_matrix(omega_c, grid: Grid, n_max):
    return np.array([fock_function(n, omega_c, grid.x) for n in range(n_max + 1)])


def adiabatic_populations(psi: Wavefunction, model, omega_c, n_max=5):
    """P_{kappa,n} = int dphi |int dx chi_n(x) psi_kappa(x, phi)|^2."""
    if psi.grid.n_molecules != 1:
        raise ValueError("adiabatic_populations is defined for one molecule")
    grid = psi.grid
    ad = adiabatic_transform(psi, model)
    chi = _fock_matrix(omega_c, grid, n_max)
    # c[kappa, n, phi]
    c = np.einsum("nx,kxp->knp", chi, ad.amps) * grid.dx
    probs = np.sum(np.abs(c) ** 2, axis=2) * grid.dphi
    total = psi.norm2()
    tail = float(total - probs.sum())
    return PopulationTable(probs, tail, n_max, tail_flagged=tail > 0.01)


@dataclass
class AdiabaticDensity:
    rho_g: np.ndarray
    rho_e: np.ndarray
    grid: Grid

    def electronic_populations(self):
        vol = self.grid.volume_element
        return float(self.rho_g.sum() * vol), float(self.rho_e.sum() * vol)


def adiabatic_density(psi: Wavefunction, model):
    ad = adiabatic_transform(psi, model)
    dens = np.abs(ad.amps) ** 2
    return AdiabaticDensity(dens[0], dens[1], psi.grid)


def count_nodes_along_x(psi: Wavefunction, model, kappa="g", floor=1e-3):
    """Sign changes along x at the density ridge of the chosen adiabatic state.

    The column phase is aligned on its largest amplitude first, so a clean
    n-photon wavepacket reports n.
    """
    ad = adiabatic_transform(psi, model)
    comp = ad.amps[{"g": 0, "e": 1}[kappa]]
    dens = np.abs(comp) ** 2
    ridge = np.unravel_index(np.argmax(dens.sum(axis=0)), dens.shape[1:])
    column = comp[(slice(None),) + tuple(np.atleast_1d(ridge))].reshape(-1)
    peak = np.argmax(np.abs(column))
    if np.abs(column[peak]) == 0:
        return 0
    aligned = (column * np.exp(-1j * np.angle(column[peak]))).real
    mask = np.abs(aligned) > floor * np.abs(aligned).max()
    signs = np.sign(aligned[mask])
    return int(np.count_nonzero(np.diff(signs)))


def cis_mask(grid: Grid, phi_cut=CIS_CUT_DEFAULT):
    return np.abs(grid.phi) >= phi_cut


def cis_trans_populations(psi: Wavefunction, model, phi_cut=CIS_CUT_DEFAULT):
    """Electronic-state populations split by configuration window.

    One molecule: {'gC', 'eC', 'gT', 'eT'}. Two molecules: the 16 joint
    entries keyed like 'eC,gC' (molecule 1 first).
    """
    grid = psi.grid
    ad = adiabatic_transform(psi, model)
    mask = cis_mask(grid, phi_cut)
    vol = grid.volume_element
    if grid.n_molecules == 1:
        dens = np.abs(ad.amps) ** 2        # (2, x, phi)
        per_phi = dens.sum(axis=1) * vol   # (2, phi)
        out = {}
        for ik, kappa in enumerate(("g", "e")):
            out[f"{kappa}C"] = float(per_phi[ik, mask].sum())
            out[f"{kappa}T"] = float(per_phi[ik, ~mask].sum())
        return out
    dens = np.abs(ad.amps.reshape((2, 2) + ad.amps.shape[1:])) ** 2
    per_phi = dens.sum(axis=2) * vol       # (k1, k2, phi1, phi2)
    masks = {"C": mask, "T": ~mask}
    out = {}
    for i1, k1 in enumerate(("g", "e")):
        for c1, m1 in masks.items():
            for i2, k2 in enumerate(("g", "e")):
                for c2, m2 in masks.items():
                    val = per_phi[i1, i2][np.ix_(m1, m2)].sum()
                    out[f"{k1}{c1},{k2}{c2}"] = float(val)
    return out


def photon_number(psi: Wavefunction, omega_c):
    """<a^dag a> = (<p^2>/omega_c + omega_c <x^2> - 1) / 2."""
    grid = psi.grid
    vol = grid.volume_element
    norm2 = psi.norm2()
    x_axis = 1
    shape = [1] * psi.amps.ndim
    shape[x_axis] = grid.spec.n_x
    x = grid.x.reshape(shape)
    x2 = float(np.sum(x**2 * np.abs(psi.amps) ** 2) * vol)
    pk = np.fft.fft(psi.amps, axis=x_axis)
    k = grid.k_x.reshape(shape)
    p_psi = np.fft.ifft(k * pk, axis=x_axis)
    p2 = float(np.sum(np.abs(p_psi) ** 2) * vol)
    return (p2 / omega_c + omega_c * x2 - norm2) / (2 * norm2)


def fock_slice(psi: Wavefunction, model, omega_c, n=2):
    """<n|Psi> in the adiabatic basis: complex array over (kappa, phi...)."""
    grid = psi.grid
    ad = adiabatic_transform(psi, model)
    chi = fock_function(n, omega_c, grid.x)
    return np.einsum("x,kx...->k...", chi, ad.amps) * grid.dx


def time_average(times_fs, series, window_fs):
    """(1/T) integral_0^T P(t) dt by the trapezoidal rule.

    The trajectory must cover the window to within one sample interval.
    """
    times_fs = np.asarray(times_fs, dtype=float)
    series = np.asarray(series, dtype=float)
    spacing = times_fs[1] - times_fs[0] if len(times_fs) > 1 else 0.0
    if window_fs > times_fs[-1] + spacing + 1e-12:
        raise ValueError(
            f"averaging window {window_fs} fs exceeds trajectory end {times_fs[-1]} fs"
        )
    sel = times_fs <= window_fs + 1e-9
    span = times_fs[sel][-1] - times_fs[sel][0]
    return float(np.trapezoid(series[sel], times_fs[sel]) / span)


# ---------------------------------------------------------------------------
# Two-molecule observables
# ---------------------------------------------------------------------------

def pair_photon_populations(psi: Wavefunction, model, omega_c, n_max=5):
    """Photon Fock populations P_n with everything else traced out."""
    grid = psi.grid
    chi = _fock_matrix(omega_c, grid, n_max)
    c = np.einsum("nx,kxpq->knpq", chi, psi.amps) * grid.dx
    probs = np.sum(np.abs(c) ** 2, axis=(0, 2, 3)) * grid.dphi**2
    tail = float(psi.norm2() - probs.sum())
    return probs, tail


def pair_state_population(psi: Wavefunction, model, omega_c, kappa1, kappa2, n):
    """P(molecule1 = kappa1, molecule2 = kappa2, photon = n), adiabatic."""
    grid = psi.grid
    ad = adiabatic_transform(psi, model)
    amps = ad.amps.reshape((2, 2) + ad.amps.shape[1:])
    idx = {"g": 0, "e": 1}
    comp = amps[idx[kappa1], idx[kappa2]]
    chi = fock_function(n, omega_c, grid.x)
    c = np.einsum("x,xpq->pq", chi, comp) * grid.dx
    return float(np.sum(np.abs(c) ** 2) * grid.dphi**2)
