from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from beamforming.circuit import (
    PICOFARAD,
    CapacitorVector,
    CircuitParams,
    build_phi,
    build_phi_grid,
    calibrate_capacitor,
    calibrate_capacitors,
    impedance,
    reflection,
    reflection_derivative,
)
from beamforming.exceptions import ConfigError, DegenerateInputError

PARAMS = CircuitParams()
F_C = 3.5e9


def parallel_oracle(f, c, params):
    """Z as L1 in parallel with the L2-R0-c branch, evaluated term by term."""
    w = 2.0 * np.pi * f
    z_shunt = 1j * w * params.L1
    z_branch = 1j * w * params.L2 + params.R0 + 1.0 / (1j * w * c)
    return z_shunt * z_branch / (z_shunt + z_branch)


class CircuitParamsTestCase(SimpleTestCase):
    """Validation of circuit constants"""

    def test_defaults_are_valid(self):
        """Test defaults are valid"""
        self.assertIs(PARAMS.validate(), PARAMS)
        self.assertAlmostEqual(PARAMS.c_min_pf, 0.01)
        self.assertAlmostEqual(PARAMS.c_max_pf, 3.0)

    def test_inverted_box_names_c_min(self):
        """Test inverted box names c_min"""
        with self.assertRaises(ConfigError) as ctx:
            CircuitParams(c_min=3e-12, c_max=1e-12).validate()
        self.assertEqual(ctx.exception.key, "circuit.c_min")

    def test_negative_resistance_rejected(self):
        """Test negative resistance rejected"""
        with self.assertRaises(ConfigError) as ctx:
            CircuitParams(R0=-1.0).validate()
        self.assertEqual(ctx.exception.key, "circuit.R0")


class ImpedanceTestCase(SimpleTestCase):
    """Impedance of the element network"""

    def test_matches_parallel_oracle(self):
        """Test matches parallel oracle"""
        z = impedance(F_C, 1e-12, PARAMS)
        expected = parallel_oracle(F_C, 1e-12, PARAMS)
        self.assertLess(abs(z - expected), 1e-12 * abs(expected))

    def test_lossless_network_is_reactive(self):
        """Test lossless network is reactive"""
        lossless = CircuitParams(R0=0.0)
        for f in (1e9, 3.5e9, 7e9):
            for c in (0.05e-12, 1e-12, 2.5e-12):
                z = impedance(f, c, lossless)
                self.assertLess(abs(np.real(z)), 1e-12 * abs(z))

    def test_parallel_resonance_diverges(self):
        """Test parallel resonance diverges"""
        lc = CircuitParams(L1=1e-9, L2=0.0, R0=0.0)
        f0 = 1.0 / (2.0 * np.pi * np.sqrt(1e-9 * 1e-12))
        self.assertAlmostEqual(f0 / 1e9, 5.033, places=3)
        magnitudes = [abs(impedance(f0 * (1 - gap), 1e-12, lc)) for gap in (1e-1, 1e-2, 1e-3, 1e-4)]
        self.assertTrue(all(a < b for a, b in zip(magnitudes, magnitudes[1:])))

    def test_non_positive_inputs_rejected(self):
        """Test non-positive inputs rejected"""
        with self.assertRaises(DegenerateInputError):
            impedance(0.0, 1e-12, PARAMS)
        with self.assertRaises(DegenerateInputError):
            impedance(F_C, 0.0, PARAMS)

    def test_pole_is_an_error(self):
        """Test pole is an error"""
        with patch("beamforming.circuit.POLE_THRESHOLD", 1e12):
            with self.assertRaises(DegenerateInputError):
                impedance(F_C, 1e-12, PARAMS)


class ReflectionTestCase(SimpleTestCase):
    """Reflection coefficient and its capacitance derivative"""

    def test_passive_over_dense_grid(self):
        """Test passive over dense grid"""
        f = np.linspace(1e9, 10e9, 100)[:, None]
        c = np.linspace(PARAMS.c_min, PARAMS.c_max, 100)[None, :]
        self.assertLessEqual(float(np.max(np.abs(reflection(f, c, PARAMS)))), 1.0 + 1e-12)

    def test_matches_oracle_on_band(self):
        """Test matches oracle on band"""
        f = np.linspace(3.45e9, 3.55e9, 16)[:, None]
        c = np.linspace(PARAMS.c_min, PARAMS.c_max, 16)[None, :]
        z = parallel_oracle(f, c, PARAMS)
        expected = (z - PARAMS.zeta0) / (z + PARAMS.zeta0)
        np.testing.assert_allclose(reflection(f, c, PARAMS), expected, rtol=1e-12, atol=1e-12)

    def test_lossless_reflection_has_unit_modulus(self):
        """Test lossless reflection has unit modulus"""
        lossless = CircuitParams(R0=0.0)
        f = np.linspace(3e9, 4e9, 50)[:, None]
        c = np.linspace(lossless.c_min, lossless.c_max, 50)[None, :]
        np.testing.assert_allclose(np.abs(reflection(f, c, lossless)), 1.0, atol=1e-12)

    def test_derivative_matches_finite_differences(self):
        """Test derivative matches finite differences"""
        rng = np.random.default_rng(3)
        for _ in range(100):
            f = rng.uniform(3.45e9, 3.55e9)
            c = rng.uniform(PARAMS.c_min, PARAMS.c_max)
            step = 1e-6 * c
            numeric = (reflection(f, c + step, PARAMS) - reflection(f, c - step, PARAMS)) / (2.0 * step)
            analytic = reflection_derivative(f, c, PARAMS)
            self.assertLess(abs(analytic - numeric), 1e-6 * abs(numeric))

    def test_picofarad_scaling(self):
        """Test picofarad scaling"""
        per_farad = reflection_derivative(F_C, 1e-12, PARAMS)
        per_pf = reflection_derivative(F_C, 1e-12, PARAMS, per_picofarad=True)
        self.assertLess(abs(per_pf - per_farad * PICOFARAD), 1e-15 * abs(per_pf))

    def test_lossless_derivative_is_tangent(self):
        """Test lossless derivative is tangent"""
        lossless = CircuitParams(R0=0.0)
        for c in (0.1e-12, 1e-12, 2e-12):
            gamma = reflection(F_C, c, lossless)
            derivative = reflection_derivative(F_C, c, lossless)
            self.assertLess(abs(np.real(np.conj(gamma) * derivative)), 1e-9 * abs(derivative))


class PhiTestCase(SimpleTestCase):
    """Stacked reflection diagonals"""

    def test_single_element(self):
        """Test single element"""
        caps = CapacitorVector([1.2])
        phi = build_phi(F_C, caps, PARAMS)
        self.assertEqual(phi.shape, (1,))
        self.assertEqual(phi[0], reflection(F_C, caps.farads[0], PARAMS))

    def test_equal_caps_give_equal_entries(self):
        """Test equal caps give equal entries"""
        phi = build_phi(F_C, CapacitorVector.midpoint(8, PARAMS), PARAMS)
        np.testing.assert_array_equal(phi, np.full(8, phi[0]))

    def test_midpoint_is_frequency_selective(self):
        """Test midpoint is frequency selective"""
        k = np.arange(1, 17)
        grid = 3.5e9 + (k - 8.5) * 100e6 / 16
        phi = build_phi_grid(grid, CapacitorVector.midpoint(4, PARAMS), PARAMS)
        self.assertEqual(phi.shape, (16, 4))
        self.assertGreater(float(np.max(np.abs(phi[:, 0] - phi[0, 0]))), 0.0)


class CalibrationTestCase(SimpleTestCase):
    """Capacitor calibration against a target response"""

    def test_round_trip_on_reachable_target(self):
        """Test round trip on reachable target"""
        for c_pf in (0.3, 1.3, 2.4):
            target = reflection(F_C, c_pf * PICOFARAD, PARAMS)
            value, residual = calibrate_capacitor(target, F_C, PARAMS)
            self.assertLess(abs(value / PICOFARAD - c_pf), 1e-3 * c_pf)
            self.assertLessEqual(residual, 1e-6)

    def test_unit_modulus_target_is_unreachable(self):
        """Test unit modulus target is unreachable"""
        _, residual = calibrate_capacitor(np.exp(0.7j), F_C, PARAMS)
        self.assertGreater(residual, 0.0)

    def test_zero_target_finds_box_minimum(self):
        """Test zero target finds box minimum"""
        dense = np.linspace(PARAMS.c_min, PARAMS.c_max, 100000)
        smallest = float(np.min(np.abs(reflection(F_C, dense, PARAMS))))
        value, residual = calibrate_capacitor(0.0, F_C, PARAMS)
        self.assertTrue(PARAMS.c_min * (1 - 1e-12) <= value <= PARAMS.c_max * (1 + 1e-12))
        self.assertAlmostEqual(residual, abs(reflection(F_C, value, PARAMS)), places=12)
        self.assertLessEqual(residual, smallest + 1e-9)

    def test_recalibration_is_idempotent(self):
        """Test recalibration is idempotent"""
        first, _ = calibrate_capacitor(reflection(F_C, 0.8e-12, PARAMS), F_C, PARAMS)
        second, _ = calibrate_capacitor(reflection(F_C, first, PARAMS), F_C, PARAMS)
        self.assertLess(abs(second - first), 1e-3 * first)

    def test_vector_calibration_stays_in_box(self):
        """Test vector calibration stays in box"""
        targets = np.exp(1j * np.linspace(0, 2 * np.pi, 6, endpoint=False))
        caps, residuals = calibrate_capacitors(targets, F_C, PARAMS)
        self.assertEqual(len(caps), 6)
        self.assertTrue(caps.in_box(PARAMS))
        self.assertEqual(residuals.shape, (6,))
