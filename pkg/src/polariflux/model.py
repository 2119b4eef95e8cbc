"""Molecular and cavity ingredients for the coupled torsion-photon problem.

The molecule is a two-state (diabatic a/b) system along a single torsional
angle phi in [-pi, pi), with the cis configuration at phi = +-pi and trans
at phi = 0. The built-in surrogate uses single-cosine diabats constrained by
three landmarks: the cis gap (2.70 eV), the diabat crossing angle
(+-1.63 rad) and phi -> -phi symmetry. Tabulated potentials can be dropped
in through `load_tabulated` when better curves are available.

All internal quantities are atomic units (hartree, bohr, a.u. time);
configuration files speak eV / fs / rad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

# Conversion constants (contract values, do not "improve" precision)
HARTREE_PER_EV = 0.036749322
AU_PER_FS = 41.34137333


class ConfigError(ValueError):
    """Bad configuration value or file."""


class TableFormatError(ValueError):
    """Malformed tabulated-potential file."""


def to_atomic_units(value, unit):
    """Convert `value` in {eV, fs, rad, au} to atomic units."""
    if unit == "eV":
        return value * HARTREE_PER_EV
    if unit == "fs":
        return value * AU_PER_FS
    if unit in ("rad", "au"):
        return value
    raise ConfigError(f"unknown unit tag {unit!r}")


def from_atomic_units(value, unit):
    """Inverse of `to_atomic_units`."""
    if unit == "eV":
        return value / HARTREE_PER_EV
    if unit == "fs":
        return value / AU_PER_FS
    if unit in ("rad", "au"):
        return value
    raise ConfigError(f"unknown unit tag {unit!r}")


@dataclass(frozen=True)
class DiabaticModel:
    """Diabatic two-state molecular model along the torsional angle.

    The four callables accept phi in radians (scalar or ndarray) and return
    hartree (potentials) or a.u. (transition dipole). They must be 2pi
    periodic and even in phi; `build_surrogate` and `load_tabulated`
    construct models that satisfy this by design.
    """

    v_a: Callable
    v_b: Callable
    v_ab: Callable
    mu_ab: Callable
    mass: float
    kind: str = "analytic-surrogate"

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class CavitySetup:
    """Single cavity mode and its coupling to the molecule(s)."""

    omega_c: float            # photon energy, hartree
    epsilon: float            # coupling scale, a.u.
    include_dse: bool = False
    n_molecules: int = 1

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ConfigError(f"omega_c must be positive, got {self.omega_c}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.n_molecules not in (1, 2):
            raise ConfigError(f"n_molecules must be 1 or 2, got {self.n_molecules}")


@dataclass(frozen=True)
class SurrogateParams:
    """Landmark parameters of the built-in cosine surrogate (eV / a.u. / rad).

    If both `amp` and `crossing_angle` are given they must satisfy
    amp = delta / (1 + cos(crossing_angle)); give either one alone to have
    the other derived.

    The transition dipole is a plateau `mu0` with a smooth symmetric dip of
    relative depth `mu_dip_depth` covering the twisted geometries
    (|phi| within `mu_dip_halfwidth` of `mu_dip_center`, tanh edges of scale
    `mu_dip_edge`). The dip suppresses light-matter coupling at the avoided
    crossings that a low-frequency cavity (omega_c below half the cis gap)
    opens there, while leaving the resonances of the half-gap cavity on the
    plateau. Set `mu_dip_depth = 0` for a strictly constant dipole.
    """

    delta: float = 2.70
    crossing_angle: float = 1.63
    amp: float | None = None
    v_ab0: float = 0.05
    mu0: float = 3.894
    mu_dip_depth: float = 0.9
    mu_dip_center: float = 1.63
    mu_dip_halfwidth: float = 0.35
    mu_dip_edge: float = 0.06

    def resolved_amp(self):
        derived = self.delta / (1.0 + math.cos(self.crossing_angle))
        if self.amp is None:
            return derived
        if abs(self.amp - derived) > 1e-9 * max(1.0, abs(derived)):
            raise ConfigError(
                f"inconsistent surrogate: amp={self.amp} but "
                f"delta/(1+cos(crossing_angle))={derived}"
            )
        return self.amp

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.v_ab0 < 0:
            raise ConfigError(f"v_ab0 must be nonnegative, got {self.v_ab0}")
        if not self.mu0 > 0:
            raise ConfigError(f"mu0 must be positive, got {self.mu0}")
        if not 0.0 <= self.mu_dip_depth < 1.0:
            raise ConfigError("mu_dip_depth must lie in [0, 1)")
        self.resolved_amp()


DEFAULT_MASS = 4.0e3  # a.u.; tuned so the packet reaches the diabat crossing in 10-25 fs


def build_surrogate(params: SurrogateParams | None = None, mass: float = DEFAULT_MASS):
    """Construct the cosine surrogate model.

    V_a(phi) = Delta - (A/2)(1 + cos phi),  V_b(phi) = (A/2)(1 + cos phi),
    with A = Delta / (1 + cos phi_x) so the diabats cross at phi = +-phi_x.
    V_ab and mu_ab are constant.
    """
    if params is None:
        params = SurrogateParams()
    delta = params.delta * HARTREE_PER_EV
    amp = params.resolved_amp() * HARTREE_PER_EV
    v_ab0 = params.v_ab0 * HARTREE_PER_EV
    mu0 = params.mu0

    def v_a(phi):
        return delta - 0.5 * amp * (1.0 + np.cos(phi))

    def v_b(phi):
        return 0.5 * amp * (1.0 + np.cos(phi))

    def v_ab(phi):
        return np.full_like(np.asarray(phi, dtype=float), v_ab0)

    depth = params.mu_dip_depth
    lo = params.mu_dip_center - params.mu_dip_halfwidth
    hi = params.mu_dip_center + params.mu_dip_halfwidth
    edge = params.mu_dip_edge

    def mu_ab(phi):
        phi = np.asarray(phi, dtype=float)
        if depth == 0.0:
            return np.full_like(phi, mu0)
        a = np.abs(np.mod(phi + np.pi, 2.0 * np.pi) - np.pi)
        dip = 0.25 * (1.0 + np.tanh((a - lo) / edge)) * (1.0 + np.tanh((hi - a) / edge))
        return mu0 * (1.0 - depth * dip)

    return DiabaticModel(v_a, v_b, v_ab, mu_ab, mass, kind="analytic-surrogate")


def model_from_callables(v_a, v_b, v_ab, mu_ab, mass, kind="custom"):
    """Wrap arbitrary callables as a model (used by tests and experiments)."""
    return DiabaticModel(v_a, v_b, v_ab, mu_ab, mass, kind=kind)


TABLE_HEADER = "# phi v_a v_b v_ab mu (a.u.)"


def save_table(path, phi, v_a, v_b, v_ab, mu):
    """Write a tabulated-model file in the documented text format."""
    data = np.column_stack([phi, v_a, v_b, v_ab, mu])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TABLE_HEADER + "\n")
        np.savetxt(fh, data, fmt="%.17g")


def load_tabulated(path, mass: float = DEFAULT_MASS):
    """Load a tabulated model and interpolate it with periodic cubic splines.

    The file must tabulate phi strictly increasing over [-pi, pi] with the
    endpoint values matching to 1e-10 hartree (2pi periodicity).
    """
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 5:
                raise TableFormatError(
                    f"{path}:{lineno}: expected 5 columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise TableFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise TableFormatError(f"{path}: no data rows")
    data = np.asarray(rows)
    phi = data[:, 0]
    if np.any(np.diff(phi) <= 0):
        bad = int(np.argmax(np.diff(phi) <= 0)) + 2
        raise TableFormatError(f"{path}:{bad}: phi column not strictly increasing")
    if abs(phi[0] + np.pi) > 1e-6 or abs(phi[-1] - np.pi) > 1e-6:
        raise TableFormatError(f"{path}: phi must span [-pi, pi], got [{phi[0]}, {phi[-1]}]")

    columns = []
    for col, name in zip(range(1, 5), ("v_a", "v_b", "v_ab", "mu")):
        y = data[:, col]
        if abs(y[0] - y[-1]) > 1e-10:
            raise TableFormatError(
                f"{path}: column {name} violates periodicity at +-pi "
                f"({y[0]} vs {y[-1]})"
            )
        spline = CubicSpline(phi, y, bc_type="periodic")
        columns.append(spline)

    def wrap(spline):
        def f(phi_val):
            wrapped = np.mod(np.asarray(phi_val, dtype=float) + np.pi, 2 * np.pi) - np.pi
            return spline(wrapped)
        return f

    return DiabaticModel(
        wrap(columns[0]), wrap(columns[1]), wrap(columns[2]), wrap(columns[3]),
        mass, kind="tabulated",
    )


def eval_diabatic(model: DiabaticModel, phi):
    """Evaluate (v_a, v_b, v_ab, mu_ab) at phi; total on all of R."""
    phi = np.asarray(phi, dtype=float)
    return (
        np.asarray(model.v_a(phi), dtype=float),
        np.asarray(model.v_b(phi), dtype=float),
        np.asarray(model.v_ab(phi), dtype=float),
        np.asarray(model.mu_ab(phi), dtype=float),
    )


def cis_gap(model: DiabaticModel):
    """V_a - V_b at the cis configuration (phi = -pi), in hartree."""
    va, vb, _, _ = eval_diabatic(model, -np.pi)
    return float(va - vb)


# --------------------------------------------------------------------------
# Run configuration (flat namespaced key=value files)
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Resolved run configuration; all energies eV, times fs on this surface."""

    # model source
    model_delta_ev: float = 2.70
    model_crossing_angle_rad: float = 1.63
    model_amp_ev: float | None = None
    model_v_ab_ev: float = 0.05
    model_mu_au: float = 3.894
    model_mu_dip_depth: float = 0.9
    model_mu_dip_center_rad: float = 1.63
    model_mu_dip_halfwidth_rad: float = 0.35
    model_mu_dip_edge_rad: float = 0.06
    model_mass_au: float = DEFAULT_MASS
    model_table_path: str | None = None

    # cavity
    cavity_omega_c_ev: float = 1.35
    cavity_epsilon: float = 0.04
    cavity_include_dse: bool = False
    cavity_n_molecules: int = 1

    # grids
    grid_n_phi: int = 199
    grid_n_x: int = 150
    grid_x_half_width_au: float | None = None   # default 9/sqrt(omega_c)

    # time stepping
    time_dt_au: float = 0.5
    time_total_fs: float = 100.0
    time_sample_every: int = 10
    time_checkpoint_every_fs: float = 5.0

    # propagator
    propagator_method: str = "strang"

    # relaxation
    relax_dt_im_au: float = 1.0
    relax_tol: float = 1e-12
    relax_max_iter: int = 200000

    # observables
    observables_n_max: int = 5
    observables_record_fock2: bool = False
    observables_snapshot_times_fs: tuple = (0.0, 10.0, 20.0, 30.0)

    # spectrum
    spectrum_omega_min_ev: float = 0.0
    spectrum_omega_max_ev: float = 4.0
    spectrum_n_omega: int = 512

    # polaritonic surfaces
    pes_n_fock: int = 8
    pes_n_phi: int = 801

    # sweep
    sweep_epsilons: tuple = (0.01, 0.02, 0.03, 0.04, 0.05)
    sweep_ratios: tuple = (0.25, 0.5, 0.75, 1.0)
    sweep_average_window_fs: float = 50.0
    sweep_workers: int = 1

    # output
    output_directory: str = "polariflux-out"


_KEY_MAP = {f.name.replace("_", ".", 1): f.name for f in fields(RunConfig)}


def _parse_value(name, raw, current):
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected boolean, got {raw!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        return tuple(float(p) for p in raw.split(",") if p.strip())
    if current is None:
        # optional floats / paths
        if raw.lower() in ("none", ""):
            return None
        try:
            return float(raw)
        except ValueError:
            return raw
    return raw


def parse_config(path=None, text=None, overrides=None):
    """Parse a flat key=value config file into a RunConfig.

    Keys use one namespacing dot (e.g. `cavity.omega_c_ev`, `grid.n_phi`).
    `#` starts a comment. Unknown keys are configuration errors.
    """
    cfg = RunConfig()
    lines = []
    if path is not None:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    elif text is not None:
        lines = text.splitlines()
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _KEY_MAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr = _KEY_MAP[key]
        setattr(cfg, attr, _parse_value(key, raw, getattr(RunConfig(), attr)))
    for key, val in (overrides or {}).items():
        attr = _KEY_MAP.get(key, key)
        if attr not in {f.name for f in fields(RunConfig)}:
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, attr, val)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    if cfg.time_dt_au <= 0:
        raise ConfigError("time.dt_au must be positive")
    if cfg.time_total_fs <= 0:
        raise ConfigError("time.total_fs must be positive")
    if cfg.observables_n_max < 2:
        raise ConfigError("observables.n_max must be >= 2")
    if cfg.grid_n_phi < 8 or cfg.grid_n_x < 8:
        raise ConfigError("grid sizes must be >= 8")
    return cfg


def build_model(cfg: RunConfig):
    """Construct the DiabaticModel described by a RunConfig."""
    if cfg.model_table_path:
        return load_tabulated(cfg.model_table_path, mass=cfg.model_mass_au)
    params = SurrogateParams(
        delta=cfg.model_delta_ev,
        crossing_angle=cfg.model_crossing_angle_rad,
        amp=cfg.model_amp_ev,
        v_ab0=cfg.model_v_ab_ev,
        mu0=cfg.model_mu_au,
        mu_dip_depth=cfg.model_mu_dip_depth,
        mu_dip_center=cfg.model_mu_dip_center_rad,
        mu_dip_halfwidth=cfg.model_mu_dip_halfwidth_rad,
        mu_dip_edge=cfg.model_mu_dip_edge_rad,
    )
    return build_surrogate(params, mass=cfg.model_mass_au)


def build_cavity(cfg: RunConfig):
    return CavitySetup(
        omega_c=cfg.cavity_omega_c_ev * HARTREE_PER_EV,
        epsilon=cfg.cavity_epsilon,
        include_dse=cfg.cavity_include_dse,
        n_molecules=cfg.cavity_n_molecules,
    )
