"""Tests for the B-spline carrier-wave control parameterization."""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.exceptions import InvalidIndexError, UndersamplingError
from app.models.system import TWO_PI, CompositeSystem, SubsystemSpec
from app.services.controls import (
    bspline_value, cardinal_bspline, control_samples, control_spectrum, lab_carrier_frequencies, lab_control,
    max_lab_amplitude, resonant_carriers, rotating_control, spline_matrix, stack_controls,
)
from tests.conftest import single_channel


class TestCardinalBspline:
    @pytest.mark.parametrize("u, expected", [(0.0, 0.0), (0.5, 0.125), (1.0, 0.5), (1.5, 0.75),
                                             (2.0, 0.5), (2.5, 0.125), (3.0, 0.0), (-0.1, 0.0), (3.1, 0.0)])
    def test_values(self, u, expected):
        assert cardinal_bspline(u) == pytest.approx(expected)

    def test_unit_integral(self):
        u = np.linspace(0.0, 3.0, 30001)
        assert trapezoid(cardinal_bspline(u), u) == pytest.approx(1.0, abs=1e-8)


class TestSplines:
    @pytest.mark.parametrize("num_splines", [3, 7, 20])
    def test_partition_of_unity(self, num_splines):
        param = single_channel(num_splines, final_time=2.5)
        times = np.linspace(0.0, 2.5, 1001)
        np.testing.assert_allclose(spline_matrix(param, 1, times).sum(axis=1), 1.0, atol=1e-12)

    def test_single_spline_matches_matrix(self):
        param = single_channel(6, final_time=1.0)
        times = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(bspline_value(param, 1, 2, times), spline_matrix(param, 1, times)[:, 2])

    def test_peak_at_center(self):
        param = single_channel(6, final_time=1.0)
        center = param.centers(1)[3]
        assert bspline_value(param, 1, 3, center) == pytest.approx(0.75)

    def test_invalid_spline_index(self):
        with pytest.raises(InvalidIndexError):
            bspline_value(single_channel(4, final_time=1.0), 1, 4, 0.5)


class TestControlFunctions:
    def test_constant_real_control(self):
        param = single_channel(5, final_time=1.0)
        alpha = np.zeros(param.size)
        param.block(alpha, 1)[:, 0, 0] = 1.3
        times = np.linspace(0.0, 1.0, 17)
        np.testing.assert_allclose(rotating_control(param, alpha, 1, times), 1.3, atol=1e-12)
        assert isinstance(rotating_control(param, alpha, 1, 0.3), complex)

    def test_carrier_modulation(self):
        omega_c = TWO_PI * 20.0
        param = single_channel(4, final_time=1.0, carriers=(omega_c,))
        alpha = np.zeros(param.size)
        param.block(alpha, 1)[:, 0, 1] = 2.0
        t = np.array([0.1, 0.37, 0.9])
        np.testing.assert_allclose(rotating_control(param, alpha, 1, t), 2.0j * np.exp(1j * omega_c * t), atol=1e-12)

    def test_lab_control_relation(self, rng):
        param = single_channel(6, final_time=1.0, carriers=(0.0, -TWO_PI * 230.56))
        alpha = rng.normal(size=param.size)
        t = np.linspace(0.0, 1.0, 50)
        omega = TWO_PI * 4416.66
        d = rotating_control(param, alpha, 1, t)
        np.testing.assert_allclose(lab_control(param, alpha, 1, t, omega), 2.0 * np.real(d * np.exp(1j * omega * t)))
        samples = control_samples(param, alpha, 1, omega, t)
        assert samples.shape == (50, 4)
        np.testing.assert_allclose(samples[:, 1] + 1j * samples[:, 2], d)

    def test_max_lab_amplitude(self):
        param = single_channel(4, final_time=1.0)
        alpha = np.zeros(param.size)
        param.block(alpha, 1)[:, 0, 0] = 0.5
        grid = np.linspace(0.0, 1.0, 20001)
        assert max_lab_amplitude(param, alpha, 1, TWO_PI * 100.0, grid) == pytest.approx(1.0, abs=1e-6)

    def test_stack_controls_shape(self):
        param = single_channel(4, final_time=1.0, count=3)
        assert stack_controls(param, np.ones(param.size), [0.0, 0.5]).shape == (3, 2)


class TestCarriersAndSpectrum:
    def test_resonant_carriers(self):
        system = CompositeSystem(subsystems=[SubsystemSpec(levels=3, freq_ghz=4.41666, selfkerr_mhz=230.56)])
        xi = TWO_PI * 230.56
        np.testing.assert_allclose(resonant_carriers(system, 1, 3), [0.0, -xi, -2 * xi])

    def test_lab_carrier_frequencies(self):
        system = CompositeSystem(subsystems=[SubsystemSpec(levels=3, freq_ghz=4.41666, selfkerr_mhz=230.56)])
        param = single_channel(4, final_time=1.0, carriers=(0.0, -TWO_PI * 230.56))
        np.testing.assert_allclose(lab_carrier_frequencies(param, system, 1), [4.41666, 4.41666 - 0.23056])

    def test_peak_at_lab_frequency(self):
        param = single_channel(5, final_time=1.0)
        alpha = np.zeros(param.size)
        param.block(alpha, 1)[:, 0, 0] = 1.0
        spectrum = np.array(control_spectrum(param, alpha, 1, TWO_PI * 50.0, sample_rate=1.0))
        peak = spectrum[np.argmax(spectrum[:, 1]), 0]
        assert peak == pytest.approx(0.05, abs=2e-3)

    def test_undersampling_rejected(self):
        param = single_channel(5, final_time=1.0)
        with pytest.raises(UndersamplingError):
            control_spectrum(param, np.zeros(param.size), 1, TWO_PI * 4416.66, sample_rate=5.0)


class TestSplineRegularity:
    def test_continuously_differentiable_at_knots(self, rng):
        param = single_channel(7, final_time=1.0, carriers=(0.0, -TWO_PI * 2.0))
        alpha = rng.normal(size=param.size)
        spacing = param.knot_spacing(1)
        h = 1e-6
        for knot in spacing * np.arange(1, 5):
            left, at, right = rotating_control(param, alpha, 1, np.array([knot - h, knot, knot + h]))
            assert abs(right - left) <= 1e-4
            assert abs((right - at) / h - (at - left) / h) <= 1e-3 * max(1.0, abs(at - left) / h)

    def test_linear_in_coefficients(self, rng):
        param = single_channel(6, final_time=1.0, carriers=(0.0, TWO_PI * 3.0))
        a, b = rng.normal(size=param.size), rng.normal(size=param.size)
        t = np.linspace(0.0, 1.0, 41)
        combined = rotating_control(param, 2.0 * a - 0.5 * b, 1, t)
        np.testing.assert_allclose(combined, 2.0 * rotating_control(param, a, 1, t)
                                   - 0.5 * rotating_control(param, b, 1, t), atol=1e-12)

    @pytest.mark.parametrize("s", [0, 2, 5])
    def test_compact_support(self, s):
        param = single_channel(6, final_time=1.0)
        spacing = param.knot_spacing(1)
        center = param.centers(1)[s]
        t = np.linspace(-1.0, 2.0, 3001)
        values = bspline_value(param, 1, s, t)
        outside = np.abs(t - center) >= 1.5 * spacing
        np.testing.assert_allclose(values[outside], 0.0, atol=1e-12)
        assert np.all(values[np.abs(t - center) < 1.4 * spacing] > 0.0)
