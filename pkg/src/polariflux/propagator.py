"""Split-operator propagation, imaginary-time relaxation, trajectory records.

Three stepping methods are available:

* ``strang``: exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2) with the photon
  harmonic confinement inside the potential factor and a fully spectral
  kinetic factor. Second order, exactly unitary.
* ``strang-ho``: same symmetric splitting, but the photon-mode Hamiltonian
  p^2/2 + omega_c^2 x^2 / 2 is exponentiated exactly (dense kernel from the
  spectral oscillator matrix) inside the kinetic factor, leaving only the
  electronic potentials and the linear light-matter term in the potential
  factor. The dominant harmonic splitting error vanishes; the linear
  coupling contributes no [T,[T,V]] error at all. Second order overall.
* ``yoshida4``: triple-jump composition of ``strang-ho`` substeps; fourth
  order. Default for production runs (energy conservation at dt = 0.5 a.u.
  is then limited by roundoff rather than splitting error).

The potential factor exponentiates the 2x2 electronic matrix at each grid
point in closed form; for two molecules the two single-flip factors commute
and are applied sequentially (their sum is the exact 4x4 exponential).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .grid import Wavefunction, fock_function, inner_product, write_checkpoint
from .hamiltonian import PotentialField, apply_hamiltonian, assemble_pair, assemble_single
from .model import AU_PER_FS, CavitySetup, DiabaticModel, eval_diabatic
from . import observables as obs
from .oracle import spectral_second_derivative

DEFAULT_METHOD = "yoshida4"
NORM_ABORT = 1e-6

_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = 1.0 - 2.0 * _YOSHIDA_W1


class ConservationError(RuntimeError):
    """Norm drifted beyond tolerance; the time step is too large."""


class RelaxationError(RuntimeError):
    """Imaginary-time relaxation failed to converge or left its basin."""


class _TwoLevelFactor:
    """exp(-i z M) for M = d I + delta sigma_z + c sigma_x per grid point."""

    def __init__(self, d, delta, c, z):
        r = np.hypot(delta, c)
        r_safe = np.where(r == 0, 1.0, r)
        sincr = np.where(r == 0, z, np.sin(z * r_safe) / r_safe)
        cosr = np.cos(z * r)
        phase = np.exp(-1j * z * d)
        self.p11 = phase * (cosr - 1j * sincr * delta)
        self.p22 = phase * (cosr + 1j * sincr * delta)
        self.p12 = phase * (-1j * sincr * c)

    def apply(self, a, b):
        return self.p11 * a + self.p12 * b, self.p12 * a + self.p22 * b


def _dense_ho_kernel(grid, omega_c, z):
    """exp(-i z (p^2/2 + omega_c^2 x^2/2)) on the x grid, dense and exact."""
    n_x = grid.spec.n_x
    h = -0.5 * spectral_second_derivative(n_x, 2 * grid.spec.x_half_width)
    h[np.diag_indices(n_x)] += 0.5 * omega_c**2 * grid.x**2
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * z * vals)) @ vecs.T


class Stepper:
    """One symmetric split step of size dt for a given field.

    `z = dt` gives real-time unitary evolution; `z = -1j * dt` the
    imaginary-time contraction used for relaxation.
    """

    def __init__(self, field: PotentialField, dt, method="strang", imaginary=False):
        if method not in ("strang", "strang-ho"):
            raise ValueError(f"unknown step method {method!r}")
        self.field = field
        self.dt = float(dt)
        self.method = method
        self.imaginary = imaginary
        grid = field.grid
        z = -1j * self.dt if imaginary else self.dt
        zh = 0.5 * z

        include_ho_in_v = method == "strang"
        harmonic = field.harmonic_x if include_ho_in_v else None

        va, vb = field.v_a, field.v_b
        delta = 0.5 * (va - vb)
        x = grid.x
        if grid.n_molecules == 1:
            d = 0.5 * (va + vb) + field.dse
            c = field.v_ab[None, :] + field.lam[None, :] * x[:, None]
            d_full = d[None, :] + (harmonic[:, None] if include_ho_in_v else 0.0)
            self._v_factors = (_TwoLevelFactor(d_full, delta[None, :], c, zh),)
        else:
            d = 0.5 * (va + vb) + field.dse
            c1 = field.v_ab[None, :, None] + field.lam[None, :, None] * x[:, None, None]
            c2 = field.v_ab[None, None, :] + field.lam[None, None, :] * x[:, None, None]
            d1 = d[None, :, None] + (0.5 * harmonic[:, None, None] if include_ho_in_v else 0.0)
            d2 = d[None, None, :] + (0.5 * harmonic[:, None, None] if include_ho_in_v else 0.0)
            self._v_factors = (
                _TwoLevelFactor(d1, delta[None, :, None], c1, zh),
                _TwoLevelFactor(d2, delta[None, None, :], c2, zh),
            )

        kphi = grid.k_phi**2 / (2.0 * field.mass)
        self._kphi_kernel = np.exp(-1j * z * kphi)
        if method == "strang":
            self._kx_kernel = np.exp(-1j * z * 0.5 * grid.k_x**2)
            self._x_dense = None
        else:
            self._kx_kernel = None
            self._x_dense = _dense_ho_kernel(grid, field.omega_c, z)
        self._grid = grid

    # -- potential half step ------------------------------------------------
    def _apply_potential_half(self, amps):
        if self._grid.n_molecules == 1:
            a, b = self._v_factors[0].apply(amps[0], amps[1])
            amps[0], amps[1] = a, b
            return amps
        f1, f2 = self._v_factors
        # molecule-1 flip acts on the first electronic bit: (aa,ab) <-> (ba,bb)
        a, b = f1.apply(amps[0], amps[2])
        amps[0], amps[2] = a, b
        a, b = f1.apply(amps[1], amps[3])
        amps[1], amps[3] = a, b
        a, b = f2.apply(amps[0], amps[1])
        amps[0], amps[1] = a, b
        a, b = f2.apply(amps[2], amps[3])
        amps[2], amps[3] = a, b
        return amps

    # -- kinetic full step ----------------------------------------------------
    def _apply_kinetic(self, amps):
        grid = self._grid
        phi_axes = tuple(range(2, amps.ndim))
        fk = np.fft.fftn(amps, axes=phi_axes)
        shape = [1] * amps.ndim
        for ax in phi_axes:
            shape_ax = shape.copy()
            shape_ax[ax] = grid.spec.n_phi
            fk *= self._kphi_kernel.reshape(shape_ax)
        amps = np.fft.ifftn(fk, axes=phi_axes)
        if self._x_dense is None:
            fx = np.fft.fft(amps, axis=1)
            shape_x = [1] * amps.ndim
            shape_x[1] = grid.spec.n_x
            fx *= self._kx_kernel.reshape(shape_x)
            return np.fft.ifft(fx, axis=1)
        moved = np.moveaxis(amps, 1, 0)
        flat = moved.reshape(grid.spec.n_x, -1)
        out = self._x_dense @ flat
        return np.moveaxis(out.reshape(moved.shape), 0, 1)

    def step(self, amps):
        amps = self._apply_potential_half(np.array(amps, copy=True))
        amps = self._apply_kinetic(amps)
        return self._apply_potential_half(amps)


class _Yoshida4:
    """Fourth-order triple-jump composition of strang-ho substeps."""

    def __init__(self, field, dt):
        self.field = field
        self.dt = float(dt)
        self._outer = Stepper(field, _YOSHIDA_W1 * dt, method="strang-ho")
        self._inner = Stepper(field, _YOSHIDA_W0 * dt, method="strang-ho")

    def step(self, amps):
        amps = self._outer.step(amps)
        amps = self._inner.step(amps)
        return self._outer.step(amps)


_STEPPER_CACHE = {}


def _get_stepper(field, dt, method, imaginary=False):
    key = (id(field), float(dt), method, imaginary)
    cached = _STEPPER_CACHE.get(key)
    if cached is not None and cached.field is field:
        return cached
    if method == "yoshida4":
        if imaginary:
            raise ValueError("yoshida4 has negative substeps; use strang for relaxation")
        stepper = _Yoshida4(field, dt)
    else:
        stepper = Stepper(field, dt, method=method, imaginary=imaginary)
    if len(_STEPPER_CACHE) > 32:
        _STEPPER_CACHE.clear()
    _STEPPER_CACHE[key] = stepper
    return stepper


def split_step(psi: Wavefunction, field: PotentialField, dt, method="strang"):
    """One symmetric split-operator step; unitary to machine precision."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = _get_stepper(field, dt, method)
    return Wavefunction(stepper.step(psi.amps), psi.grid)


class RelaxResult(NamedTuple):
    psi: Wavefunction
    energy: float
    iterations: int


def relax_ground_state(field: PotentialField, guess: Wavefunction, dt_im=1.0,
                       tol=1e-12, max_iter=200_000, monitor=None,
                       monitor_every=50, method="strang-ho"):
    """Imaginary-time relaxation with per-step renormalization.

    Iterates until successive energy expectations differ by less than `tol`
    (hartree). `monitor`, if given, is called periodically with the current
    state and must return True while the state remains in the intended
    basin; a False return aborts with a RelaxationError.
    """
    stepper = _get_stepper(field, dt_im, method, imaginary=True)
    psi = guess.copy().normalize()
    energy_prev = None
    for iteration in range(1, max_iter + 1):
        psi = Wavefunction(stepper.step(psi.amps), psi.grid).normalize()
        energy = float(inner_product(psi, apply_hamiltonian(field, psi)).real)
        if monitor is not None and iteration % monitor_every == 0:
            if not monitor(psi):
                raise RelaxationError(
                    "relaxation left its basin; shorten the imaginary time "
                    "step or start from a deeper guess"
                )
        if energy_prev is not None and abs(energy - energy_prev) < tol:
            if monitor is not None and not monitor(psi):
                raise RelaxationError(
                    "relaxation converged outside the intended basin"
                )
            return RelaxResult(psi, energy, iteration)
        energy_prev = energy
    raise RelaxationError(
        f"no convergence to tol={tol} within {max_iter} iterations "
        f"(last energy {energy_prev})"
    )


def _wrapped_offset(phi, center):
    return np.angle(np.exp(1j * (phi - center)))


def _cis_fraction(psi: Wavefunction, phi_cut=obs.CIS_CUT_DEFAULT):
    mask = obs.cis_mask(psi.grid, phi_cut)
    dens = np.abs(psi.amps) ** 2
    phi_axes_before = tuple(range(dens.ndim - 1))
    per_phi = dens.sum(axis=phi_axes_before)
    total = dens.sum()
    if psi.grid.n_molecules == 2:
        per_phi = dens.sum(axis=(0, 1, 3))   # molecule-1 marginal
    return float(per_phi[mask].sum() / total)


def cis_ground_state(model: DiabaticModel, cavity: CavitySetup, grid,
                     dt_im=1.0, tol=1e-12, max_iter=200_000):
    """Vibrational ground state of the cis basin with the cavity decoupled.

    Returns the relaxed two-component state (lower adiabat, cis-localized,
    times the cavity vacuum) and its energy; the energy includes the
    decoupled photon zero point omega_c/2 and serves as the spectral
    reference omega_0.
    """
    decoupled = CavitySetup(omega_c=cavity.omega_c, epsilon=0.0,
                            include_dse=False, n_molecules=1)
    field = assemble_single(model, decoupled, grid)

    # curvature of the lower adiabat at the cis minimum sets the guess width
    h = 1e-3
    phis = -np.pi + np.array([-h, 0.0, h])
    va, vb, vab, _ = eval_diabatic(model, phis)
    lower = 0.5 * (va + vb) - np.hypot(0.5 * (va - vb), vab)
    curvature = (lower[0] - 2 * lower[1] + lower[2]) / h**2
    if curvature > 1e-12:
        omega_vib = np.sqrt(curvature / model.mass)
        width_arg = 0.5 * model.mass * omega_vib
    else:
        width_arg = 2.0  # flat potential fallback
    dphi = _wrapped_offset(grid.phi, -np.pi)
    vib_guess = np.exp(-width_arg * dphi**2)

    amps = np.zeros(grid.shape, dtype=complex)
    amps[1] = fock_function(0, cavity.omega_c, grid.x)[:, None] * vib_guess[None, :]
    guess = Wavefunction(amps, grid)

    monitor = lambda p: _cis_fraction(p) > 0.999
    result = relax_ground_state(field, guess, dt_im=dt_im, tol=tol,
                                max_iter=max_iter, monitor=monitor)
    return result


def make_initial_state(model: DiabaticModel, cavity: CavitySetup, grid,
                       dt_im=1.0, tol=1e-12, relaxed=None):
    """Franck-Condon product state: cis vibrational ground function on |a>,
    cavity vacuum. Real amplitudes by construction.
    """
    if relaxed is None:
        relaxed = cis_ground_state(model, cavity, grid, dt_im=dt_im, tol=tol)
    vib = _extract_vibrational_profile(relaxed.psi, model, cavity.omega_c)
    chi0 = fock_function(0, cavity.omega_c, grid.x)
    amps = np.zeros(grid.shape, dtype=complex)
    amps[0] = chi0[:, None] * vib[None, :]
    return Wavefunction(amps, grid).normalize()


def _extract_vibrational_profile(psi: Wavefunction, model, omega_c):
    ad = obs.adiabatic_transform(psi, model)
    chi0 = fock_function(0, omega_c, psi.grid.x)
    vib = np.einsum("x,xp->p", chi0, ad.amps[0]) * psi.grid.dx
    vib /= np.sqrt(np.sum(np.abs(vib) ** 2) * psi.grid.dphi)
    peak = np.argmax(np.abs(vib))
    vib = vib * np.exp(-1j * np.angle(vib[peak]))
    residue = np.abs(vib.imag).max()
    if residue > 1e-10:
        raise RelaxationError(f"vibrational profile not real (residue {residue:.2e})")
    return vib.real


def make_initial_state_pair(model: DiabaticModel, cavity: CavitySetup, grid,
                            dt_im=1.0, tol=1e-12, vib_profile=None,
                            shared_excitation=False):
    """Two-molecule start: molecule 1 excited at cis, molecule 2 in its cis
    ground state, cavity vacuum. With `shared_excitation` the excitation is
    split symmetrically between the molecules.
    """
    if vib_profile is None:
        spec1 = grid.spec
        from .grid import build_grid
        grid1 = build_grid(spec1, n_molecules=1)
        cav1 = CavitySetup(omega_c=cavity.omega_c, epsilon=cavity.epsilon,
                           include_dse=cavity.include_dse, n_molecules=1)
        relaxed = cis_ground_state(model, cav1, grid1, dt_im=dt_im, tol=tol)
        vib_profile = _extract_vibrational_profile(relaxed.psi, model, cavity.omega_c)
    chi0 = fock_function(0, cavity.omega_c, grid.x)
    amps = np.zeros(grid.shape, dtype=complex)
    base = chi0[:, None, None] * vib_profile[None, :, None] * vib_profile[None, None, :]
    # electronic index = 2*k1 + k2 over the diabats {a=0, b=1}
    amps[1] = base                     # |a b> : molecule 1 excited
    if shared_excitation:
        amps[1] = base / np.sqrt(2)
        amps[2] = base / np.sqrt(2)    # |b a> : molecule 2 excited
    return Wavefunction(amps, grid).normalize()


# ---------------------------------------------------------------------------
# Trajectory recording
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """Sampled time series of a single propagation."""

    times_fs: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    autocorr: np.ndarray
    pop_labels: list
    populations: np.ndarray            # (n_samples, len(pop_labels))
    fock2: np.ndarray | None           # (n_samples, 2, n_phi) for one molecule
    checkpoint_paths: list
    meta: dict = dataclass_field(default_factory=dict)

    def column(self, label):
        return self.populations[:, self.pop_labels.index(label)]

    def sample_spacing_au(self):
        return float((self.times_fs[1] - self.times_fs[0]) * AU_PER_FS)

    def to_csv(self, path):
        header = ["time_fs", "norm", "energy_hartree", "re_autocorr",
                  "im_autocorr"] + list(self.pop_labels)
        data = np.column_stack([
            self.times_fs, self.norm, self.energy,
            self.autocorr.real, self.autocorr.imag, self.populations,
        ])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")

    def write_metadata(self, path):
        meta = dict(self.meta)
        meta["conservation"] = {
            "max_norm_deviation": float(np.abs(self.norm - 1).max()),
            "max_relative_energy_drift": float(
                np.abs(self.energy - self.energy[0]).max() / abs(self.energy[0])
            ),
        }
        meta["checkpoints"] = list(map(str, self.checkpoint_paths))
        Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True),
                              encoding="utf-8")


def _sample_single(psi, model, omega_c, n_max, phi_cut):
    table = obs.adiabatic_populations(psi, model, omega_c, n_max)
    ct = obs.cis_trans_populations(psi, model, phi_cut)
    values = list(table.values()) + [table.tail] + [
        ct["gC"], ct["eC"], ct["gT"], ct["eT"],
        obs.photon_number(psi, omega_c),
    ]
    labels = table.labels() + ["fock_tail", "P_gC", "P_eC", "P_gT", "P_eT",
                               "photon_number"]
    return labels, values


def _sample_pair(psi, model, omega_c, n_max, phi_cut):
    probs, tail = obs.pair_photon_populations(psi, model, omega_c, n_max)
    ct = obs.cis_trans_populations(psi, model, phi_cut)
    labels = [f"P_n{n}" for n in range(n_max + 1)] + ["fock_tail"]
    values = list(probs) + [tail]
    for key in sorted(ct):
        labels.append("P_" + key.replace(",", "_"))
        values.append(ct[key])
    labels += ["P_gg2", "photon_number"]
    values += [obs.pair_state_population(psi, model, omega_c, "g", "g", 2),
               obs.photon_number(psi, omega_c)]
    return labels, values


def propagate(psi0: Wavefunction, field: PotentialField, model: DiabaticModel,
              total_fs, dt_au=0.5, sample_every=10, n_max=5,
              record_fock2=False, method=DEFAULT_METHOD, outdir=None,
              checkpoint_every_fs=5.0, phi_cut=obs.CIS_CUT_DEFAULT,
              observers=None):
    """Propagate psi0 under the field, sampling observables periodically.

    Samples land on steps 0, sample_every, 2*sample_every, ...; checkpoints
    are written every `checkpoint_every_fs` when `outdir` is given. Aborts
    with ConservationError if the norm drifts beyond 1e-6.
    """
    if dt_au <= 0 or total_fs <= 0:
        raise ValueError("dt and total time must be positive")
    if record_fock2 and field.grid.n_molecules != 1:
        raise ValueError("fock2 recording is defined for one molecule")
    stepper = _get_stepper(field, dt_au, method)
    n_steps = int(round(total_fs * AU_PER_FS / dt_au))
    omega_c = field.omega_c

    sampler = _sample_single if field.grid.n_molecules == 1 else _sample_pair
    checkpoint_stride = None
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        checkpoint_stride = max(1, int(round(checkpoint_every_fs * AU_PER_FS / dt_au)))

    times, norms, energies, autocs, pops, focks = [], [], [], [], [], []
    checkpoints = []
    pop_labels = None
    psi = psi0.copy()
    amps0_conj = np.conj(psi0.amps)
    vol = psi0.grid.volume_element

    def sample(step, amps):
        nonlocal pop_labels
        t_fs = step * dt_au / AU_PER_FS
        psi_s = Wavefunction(amps, psi0.grid)
        nrm = psi_s.norm()
        if abs(nrm - 1.0) > NORM_ABORT:
            raise ConservationError(
                f"norm deviation {abs(nrm - 1.0):.3e} at t={t_fs:.2f} fs; reduce dt"
            )
        labels, values = sampler(psi_s, model, omega_c, n_max, phi_cut)
        pop_labels = labels
        times.append(t_fs)
        norms.append(nrm)
        energies.append(float(inner_product(psi_s, apply_hamiltonian(field, psi_s)).real))
        autocs.append(complex(np.sum(amps0_conj * amps) * vol))
        pops.append(values)
        if record_fock2:
            focks.append(obs.fock_slice(psi_s, model, omega_c, n=2))
        for observer in observers or ():
            observer(psi_s, step, t_fs)

    sample(0, psi.amps)
    if checkpoint_stride is not None:
        path = outdir / "checkpoint_000000.plwf"
        write_checkpoint(path, psi, 0.0)
        checkpoints.append(path)

    amps = psi.amps
    for step in range(1, n_steps + 1):
        amps = stepper.step(amps)
        if step % sample_every == 0:
            sample(step, amps)
        if checkpoint_stride is not None and step % checkpoint_stride == 0:
            path = outdir / f"checkpoint_{step:06d}.plwf"
            write_checkpoint(path, Wavefunction(amps, psi0.grid), step * dt_au)
            checkpoints.append(path)

    record = TrajectoryRecord(
        times_fs=np.array(times),
        norm=np.array(norms),
        energy=np.array(energies),
        autocorr=np.array(autocs),
        pop_labels=pop_labels,
        populations=np.array(pops),
        fock2=np.array(focks) if focks else None,
        checkpoint_paths=checkpoints,
        meta={
            "dt_au": dt_au,
            "total_fs": total_fs,
            "n_steps": n_steps,
            "sample_every": sample_every,
            "method": method,
            "n_max": n_max,
            "omega_c_hartree": omega_c,
            "mass_au": field.mass,
            "n_molecules": field.grid.n_molecules,
            "include_dse": field.include_dse,
        },
    )
    return record
