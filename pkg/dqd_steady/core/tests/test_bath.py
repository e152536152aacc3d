import math

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from core.exceptions import ParameterError
from core.services.bath import (
    OMEGA_MAX_FACTOR, coth_half_beta, corr_polaron, corr_weak_grid, eta, eta_second_order, gamma_estimate,
    lorfit_correlation, lorfit_poles, polaron_correlations, r_tau, r_tau_grid, spectral_density,
)
from core.services.expfit import LorFit, fit_lorentzian_spectral
from core.services.kernels import FitSettings, effective_tau_max

from .test_model import reference_params


class SpectralDensityTests(SimpleTestCase):
    def test_vanishes_at_zero_frequency(self):
        self.assertEqual(spectral_density(0.0, reference_params()), 0.0)

    def test_closed_form(self):
        p = reference_params()
        expected = 0.5 * 0.09 * 1.0 * 4.0 / (1.0 + 4.0) * (1 - math.sin(16.0) / 16.0)
        self.assertAlmostEqual(spectral_density(1.0, p), expected, places=14)

    def test_small_argument_series_is_continuous(self):
        p = reference_params()
        w = np.array([0.999e-3, 1.001e-3]) / p.d_cs
        values = spectral_density(w, p)
        self.assertAlmostEqual(values[0] / values[1], (0.999 / 1.001) ** 3, places=6)

    def test_negative_frequency_is_rejected(self):
        with self.assertRaises(ParameterError):
            spectral_density(-1.0, reference_params())

    def test_zero_temperature_coth(self):
        np.testing.assert_array_equal(coth_half_beta([0.1, 1.0, 10.0], 0.0), [1.0, 1.0, 1.0])


class RenormalizationTests(SimpleTestCase):
    def test_uncoupled_bath(self):
        self.assertEqual(eta(reference_params(P=0.0)), 1.0)
        self.assertEqual(eta_second_order(reference_params(P=0.0)), 1.0)
        self.assertEqual(eta(reference_params(d_cs=0.0)), 1.0)

    def test_eta_inside_unit_interval(self):
        p = reference_params()
        value = eta(p)
        self.assertGreater(value, 0.0)
        self.assertLess(value, 1.0)
        # thermal occupation only lowers eta
        self.assertLess(value, eta(reference_params(kT=0.0)))

    def test_second_order_error_is_quadratic(self):
        for P in (0.005, 0.008, 0.09):
            with self.subTest(P=P):
                p = reference_params(P=P, kT=0.0)
                second = eta_second_order(p)
                self.assertLessEqual(abs(eta(p) - second), (1.0 - second) ** 2)
        self.assertLess(1.0 - eta_second_order(reference_params(P=0.005, kT=0.0)), 0.05)

    def test_eta_decreases_with_coupling_and_temperature(self):
        by_coupling = [eta(reference_params(P=P)) for P in (0.01, 0.05, 0.09)]
        by_temperature = [eta(reference_params(kT=kT)) for kT in (0.0, 0.06, 0.12, 0.24)]
        for values in (by_coupling, by_temperature):
            self.assertTrue(all(b < a for a, b in zip(values, values[1:])), values)


class CorrelationTests(SimpleTestCase):
    def test_r_at_zero_matches_eta(self):
        p = reference_params()
        r0 = r_tau(p, 0.0)
        self.assertAlmostEqual(r0.real, 2.0 * math.log(eta(p)), delta=1e-6)
        self.assertAlmostEqual(r0.imag, 0.0)

    def test_polaron_correlations_at_zero(self):
        p = reference_params()
        value = eta(p)
        c11, c22 = corr_polaron(p, value, 0.0)
        self.assertAlmostEqual(c11.real, (1 - value ** 2) ** 2 / 2, delta=1e-6)
        self.assertAlmostEqual(c22.real, (1 - value ** 4) / 2, delta=1e-6)

    def test_polaron_correlations_vanish_without_fluctuations(self):
        c11, c22 = polaron_correlations(0.7, np.zeros(3))
        np.testing.assert_array_equal(c11, 0)
        np.testing.assert_array_equal(c22, 0)

    def test_uncoupled_kernels_are_zero(self):
        p = reference_params(P=0.0)
        np.testing.assert_array_equal(r_tau_grid(p, [0.0, 1.0, 2.0]), 0)
        np.testing.assert_array_equal(corr_weak_grid(p, None, [0.0, 1.0]), 0)

    def test_weak_kernel_is_hermitian_symmetric_at_origin(self):
        p = reference_params()
        self.assertAlmostEqual(corr_weak_grid(p, None, [0.0])[0].imag, 0.0)
        self.assertGreater(corr_weak_grid(p, None, [0.0])[0].real, 0.0)

    def test_negative_tau_is_rejected(self):
        with self.assertRaises(ParameterError):
            r_tau(reference_params(), -1.0)


class GammaEstimateTests(SimpleTestCase):
    def test_reference_coupling_violates_weak_coupling(self):
        estimate = gamma_estimate(reference_params())
        self.assertAlmostEqual(estimate.gamma, 0.09)
        self.assertFalse(estimate.weak_coupling_ok)
        self.assertIn("violated", estimate.report)

    def test_small_coupling_off_resonance(self):
        estimate = gamma_estimate(reference_params(P=0.001, epsilon=0.4))
        self.assertTrue(estimate.weak_coupling_ok)


class CorrelationWindowTests(SimpleTestCase):
    def test_r_converges_over_the_whole_kernel_window(self):
        p = reference_params(omega_c=1.0, d_cs=20.0)
        taus = np.linspace(0.0, effective_tau_max(p, FitSettings()), 400)
        r = r_tau_grid(p, taus)
        self.assertTrue(np.all(np.isfinite(r)))
        self.assertAlmostEqual(r[0].real, 2.0 * math.log(eta(p)), delta=1e-6)

    def test_r_decays(self):
        p = reference_params()
        r0, r_late = r_tau_grid(p, [0.0, 200.0])
        self.assertLess(abs(r_late), 1e-3 * abs(r0))


class LorentzianCorrelationTests(SimpleTestCase):
    fit = LorFit(np.array([0.3]), np.array([2.0]), np.array([1.0]))

    def test_poles(self):
        alpha, gamma = lorfit_poles(self.fit)
        np.testing.assert_allclose(alpha, [0.3 * math.pi])
        np.testing.assert_allclose(gamma, [-1.0 - 2.0j])

    def test_value_at_origin(self):
        expected = 0.3 * (math.pi / 2 + math.atan((4.0 - 1.0) / 4.0))
        value = lorfit_correlation(self.fit, [0.0])[0]
        self.assertAlmostEqual(value.real, expected, delta=1e-7)
        self.assertAlmostEqual(value.imag, 0.0, delta=1e-12)

    def test_matches_fourier_quadrature(self):
        values = lorfit_correlation(self.fit, [0.4, 1.5, 7.0])
        for tau, value in zip((0.4, 1.5, 7.0), values):
            with self.subTest(tau=tau):
                re, _ = quad(self.fit.evaluate, 0.0, np.inf, weight="cos", wvar=tau)
                im, _ = quad(self.fit.evaluate, 0.0, np.inf, weight="sin", wvar=tau)
                self.assertAlmostEqual(value.real, re, delta=1e-6)
                self.assertAlmostEqual(value.imag, -im, delta=1e-6)

    def test_weak_kernel_agrees_with_cut_integral(self):
        # envelope falls as w^-3, so a cut at 200 misses about 3e-5
        p = reference_params()
        taus = [0.0, 0.7, 3.0, 25.0]
        full = corr_weak_grid(p, self.fit, taus)
        cut = corr_weak_grid(p, self.fit, taus, omega_max=200.0)
        np.testing.assert_allclose(full, cut, rtol=0, atol=1e-4)

    def test_fitted_envelope_reproduces_direct_kernel(self):
        settings = FitSettings()
        p = reference_params(omega_c=1.0, d_cs=20.0)
        lorfit = fit_lorentzian_spectral(p, settings.n_terms_max, tol=settings.fit_tol_spectral)
        taus = np.linspace(0.5, 60.0, 120) / p.omega_c
        direct = corr_weak_grid(p, None, taus)
        fitted = corr_weak_grid(p, lorfit, taus, omega_max=OMEGA_MAX_FACTOR * p.omega_c)
        self.assertLessEqual(np.max(np.abs(fitted - direct)), 1e-3 * np.max(np.abs(direct)))
