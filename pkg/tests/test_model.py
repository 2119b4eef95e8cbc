import math

import numpy as np
import pytest
from scipy.optimize import brentq

from polariflux.model import (
    AU_PER_FS,
    HARTREE_PER_EV,
    ConfigError,
    SurrogateParams,
    TableFormatError,
    build_surrogate,
    cis_gap,
    eval_diabatic,
    from_atomic_units,
    load_tabulated,
    parse_config,
    save_table,
    to_atomic_units,
)

# Frozen landmarks, computed from the closed forms below (see test bodies).
AMP_EV = 2.70 / (1.0 + math.cos(1.63))            # 2.8698036830644478
RES_INNER = math.acos((2.70 + 1.35) / AMP_EV - 1)  # 1.1469753501908464
RES_OUTER = math.acos((2.70 - 1.35) / AMP_EV - 1)  # 2.1289070445811817


class TestUnits:
    def test_ev_conversion(self):
        assert to_atomic_units(2.70, "eV") == pytest.approx(0.0992232, abs=1e-7)

    def test_zero(self):
        assert to_atomic_units(0.0, "eV") == 0.0

    def test_fs_conversion(self):
        assert to_atomic_units(100.0, "fs") == pytest.approx(4134.137, abs=1e-3)

    def test_passthrough(self):
        assert to_atomic_units(1.63, "rad") == 1.63
        assert to_atomic_units(0.04, "au") == 0.04

    def test_unknown_unit(self):
        with pytest.raises(ConfigError):
            to_atomic_units(1.0, "kcal")

    def test_round_trip(self, rng):
        for unit in ("eV", "fs", "rad", "au"):
            vals = rng.uniform(-10, 10, size=16)
            back = from_atomic_units(to_atomic_units(vals, unit), unit)
            assert np.allclose(back, vals, rtol=1e-14, atol=0)


class TestSurrogate:
    def test_amplitude_from_crossing(self):
        params = SurrogateParams()
        assert params.resolved_amp() == pytest.approx(2.8698036830644478, rel=1e-12)

    def test_inconsistent_triple_rejected(self):
        with pytest.raises(ConfigError):
            SurrogateParams(delta=2.70, crossing_angle=1.63, amp=3.0)

    def test_cis_gap(self, surrogate):
        assert cis_gap(surrogate) == pytest.approx(2.70 * HARTREE_PER_EV, rel=1e-12)

    def test_crossing_location(self, surrogate):
        gap = lambda p: float(surrogate.v_a(p) - surrogate.v_b(p))
        root = brentq(gap, 1.0, 2.2, xtol=1e-12)
        assert root == pytest.approx(1.63, abs=5e-3)
        # symmetric partner
        root_neg = brentq(gap, -2.2, -1.0, xtol=1e-12)
        assert root_neg == pytest.approx(-1.63, abs=5e-3)

    def test_values_at_trans(self, surrogate):
        va, vb, vab, mu = eval_diabatic(surrogate, 0.0)
        assert vb == pytest.approx(AMP_EV * HARTREE_PER_EV, rel=1e-12)
        assert va == pytest.approx((2.70 - AMP_EV) * HARTREE_PER_EV, rel=1e-12)
        assert vab == pytest.approx(0.05 * HARTREE_PER_EV, rel=1e-12)
        assert mu == pytest.approx(3.894, rel=1e-12)

    def test_resonance_angles_closed_form(self, surrogate):
        # |V_a - V_b| = omega_c at cos(phi) = (delta -+ omega_c)/A - 1
        wc = 1.35 * HARTREE_PER_EV
        gap = lambda p: abs(float(surrogate.v_a(p) - surrogate.v_b(p))) - wc
        inner = brentq(gap, 0.2, 1.6, xtol=1e-12)
        outer = brentq(gap, 1.66, 3.0, xtol=1e-12)
        assert inner == pytest.approx(RES_INNER, abs=2e-3)
        assert outer == pytest.approx(RES_OUTER, abs=2e-3)
        # paper-reported landmarks
        assert abs(inner - 1.16) < 0.05
        assert abs(outer - 2.14) < 0.05

    def test_periodicity_and_symmetry(self, surrogate, rng):
        phis = rng.uniform(-np.pi, np.pi, size=64)
        for shift in (2 * np.pi, -2 * np.pi):
            a = np.array(eval_diabatic(surrogate, phis))
            b = np.array(eval_diabatic(surrogate, phis + shift))
            assert np.allclose(a, b, atol=1e-12, rtol=0)
        a = np.array(eval_diabatic(surrogate, phis))
        c = np.array(eval_diabatic(surrogate, -phis))
        assert np.allclose(a, c, atol=1e-12, rtol=0)

    def test_mass_validation(self):
        with pytest.raises(ConfigError):
            build_surrogate(mass=-1.0)


class TestTabulated:
    def _write_surrogate_table(self, path, n=199):
        surrogate = build_surrogate()
        phi = np.linspace(-np.pi, np.pi, n)
        va, vb, vab, mu = eval_diabatic(surrogate, phi)
        save_table(path, phi, va, vb, vab, mu)

    def test_round_trip_against_analytic(self, tmp_path, surrogate, rng):
        path = tmp_path / "table.dat"
        self._write_surrogate_table(path)
        model = load_tabulated(path, mass=surrogate.mass)
        phis = rng.uniform(-np.pi, np.pi, size=200)
        exact = np.array(eval_diabatic(surrogate, phis))
        interp = np.array(eval_diabatic(model, phis))
        assert np.max(np.abs(exact[:3] - interp[:3])) < 1e-6   # potentials, hartree
        assert np.max(np.abs(exact[3] - interp[3])) < 1e-6

    def test_periodic_extension(self, tmp_path):
        path = tmp_path / "table.dat"
        self._write_surrogate_table(path)
        model = load_tabulated(path)
        a = np.array(eval_diabatic(model, 1.234))
        b = np.array(eval_diabatic(model, 1.234 + 2 * np.pi))
        assert np.allclose(a, b, atol=1e-12)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.dat"
        path.write_text("# phi v_a v_b v_ab mu (a.u.)\n")
        with pytest.raises(TableFormatError):
            load_tabulated(path)

    def test_periodicity_violation(self, tmp_path):
        path = tmp_path / "bad.dat"
        phi = np.linspace(-np.pi, np.pi, 51)
        va = np.cos(phi)
        va[-1] += 1e-3
        z = np.zeros_like(phi)
        save_table(path, phi, va, z, z, z + 1.0)
        with pytest.raises(TableFormatError, match="periodicity"):
            load_tabulated(path)

    def test_non_monotone_phi(self, tmp_path):
        path = tmp_path / "bad.dat"
        phi = np.linspace(-np.pi, np.pi, 51)
        phi[10] = phi[9]
        z = np.zeros_like(phi)
        save_table(path, phi, np.cos(phi) - np.cos(phi[0]) + np.cos(np.pi), z, z, z + 1.0)
        with pytest.raises(TableFormatError, match="increasing"):
            load_tabulated(path)

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("0.0 1.0 2.0\n")
        with pytest.raises(TableFormatError, match="5 columns"):
            load_tabulated(path)


class TestConfig:
    def test_defaults_and_parse(self):
        cfg = parse_config(text="""
            # comment line
            cavity.omega_c_ev = 0.675
            cavity.epsilon = 0.02
            cavity.include_dse = true
            grid.n_phi = 99
            sweep.epsilons = 0.01, 0.02
        """)
        assert cfg.cavity_omega_c_ev == 0.675
        assert cfg.cavity_epsilon == 0.02
        assert cfg.cavity_include_dse is True
        assert cfg.grid_n_phi == 99
        assert cfg.sweep_epsilons == (0.01, 0.02)
        assert cfg.time_dt_au == 0.5   # untouched default

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(text="cavity.wrong = 1.0")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_config(text="cavity.omega_c_ev 1.0")

    def test_validation(self):
        with pytest.raises(ConfigError):
            parse_config(text="time.dt_au = -0.5")
        with pytest.raises(ConfigError):
            parse_config(text="observables.n_max = 1")
