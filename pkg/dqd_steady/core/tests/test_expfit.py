import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ArtifactError, FitError, ParameterError
from core.services.bath import KernelSamples
from core.services.expfit import (
    ExpFit, LorFit, eval_expfit, fit_exponentials, fit_lorentzian_spectral, fit_lorentzians,
    heldout_residual, read_expfit, read_lorfit, write_expfit, write_lorfit,
)
from core.services.kernels import FitSettings

from .test_model import reference_params

TAU = np.linspace(0.0, 20.0, 201)


def samples(alpha, gamma, tau=TAU, name="kernel"):
    return KernelSamples(name, tau, eval_expfit(ExpFit(np.asarray(alpha, complex), np.asarray(gamma, complex)), tau))


class ExponentialFitTests(SimpleTestCase):
    def test_single_exponential_is_recovered(self):
        fit = fit_exponentials(samples([0.7], [-0.3 + 0.9j]), tol=1e-10, m_max=4)
        self.assertEqual(fit.n_terms, 1)
        self.assertAlmostEqual(abs(fit.alpha[0] - 0.7), 0.0, delta=1e-8)
        self.assertAlmostEqual(abs(fit.gamma[0] - (-0.3 + 0.9j)), 0.0, delta=1e-8)

    def test_two_exponentials(self):
        data = samples([0.5, 0.3], [-0.2 + 1.0j, -1.0], name="c11")
        fit = fit_exponentials(data, tol=1e-8, m_max=6)
        self.assertEqual(fit.n_terms, 2)
        self.assertEqual(fit.name, "c11")
        self.assertLessEqual(fit.residual, 1e-8)
        self.assertTrue(np.all(fit.gamma.real < 0))
        held_out = samples([0.5, 0.3], [-0.2 + 1.0j, -1.0], tau=TAU[:-1] + 0.05)
        self.assertLess(heldout_residual(fit, held_out), 1e-6)

    def test_known_terms_are_kept_in_front(self):
        data = samples([0.5, 0.3], [-0.2 + 1.0j, -1.0])
        known = ExpFit(np.array([0.5 + 0j]), np.array([-0.2 + 1.0j]))
        fit = fit_exponentials(data, tol=1e-8, m_max=3, known=known)
        self.assertEqual(fit.n_terms, 2)
        self.assertEqual(fit.alpha[0], 0.5)
        self.assertAlmostEqual(abs(fit.gamma[1] + 1.0), 0.0, delta=1e-6)
        self.assertLessEqual(fit.residual, 1e-8)

    def test_known_terms_alone_can_suffice(self):
        data = samples([0.7], [-0.3 + 0.9j])
        known = ExpFit(np.array([0.7 + 0j]), np.array([-0.3 + 0.9j]))
        fit = fit_exponentials(data, tol=1e-10, m_max=4, known=known)
        self.assertEqual(fit.n_terms, 1)

    def test_too_few_terms_raises_with_residual_curve(self):
        data = samples([0.5, 0.3], [-0.2 + 1.0j, -1.0])
        with self.assertRaises(FitError) as ctx:
            fit_exponentials(data, tol=1e-10, m_max=1)
        self.assertEqual(len(ctx.exception.diagnostics["residual_curve"]), 1)
        self.assertGreater(ctx.exception.diagnostics["best_residual"], 1e-10)

    def test_non_uniform_grid_is_rejected(self):
        tau = np.concatenate([TAU[:10], TAU[10:] + 0.01])
        with self.assertRaises(ParameterError):
            fit_exponentials(samples([1.0], [-1.0], tau=tau), tol=1e-6, m_max=2)

    def test_too_few_samples_are_rejected(self):
        with self.assertRaises(ParameterError):
            fit_exponentials(samples([1.0], [-1.0], tau=TAU[:3]), tol=1e-6, m_max=2)

    def test_zero_kernel_gives_empty_fit(self):
        fit = fit_exponentials(KernelSamples("weak", TAU, np.zeros(TAU.size, complex)), tol=1e-6, m_max=4)
        self.assertEqual(fit.n_terms, 0)
        self.assertEqual(fit(3.0), 0)


class ExpFitEvaluationTests(SimpleTestCase):
    fit = ExpFit(np.array([0.4 + 0.1j, 0.6]), np.array([-0.5 + 2j, -0.1]))

    def test_value_at_origin_is_sum_of_amplitudes(self):
        self.assertAlmostEqual(eval_expfit(self.fit, 0.0), 1.0 + 0.1j)
        self.assertIsInstance(self.fit(0.0), complex)

    def test_vectorized_evaluation(self):
        taus = np.array([0.0, 1.0, 2.5])
        values = self.fit(taus)
        self.assertEqual(values.shape, (3,))
        self.assertAlmostEqual(values[2], self.fit(2.5))

    def test_decay_beyond_relaxation_time(self):
        self.assertAlmostEqual(self.fit.relaxation_time, 10.0)
        self.assertLess(abs(self.fit(10 * self.fit.relaxation_time)), 1e-4)


class LorentzianFitTests(SimpleTestCase):
    def test_single_lorentzian_is_recovered(self):
        omega = np.geomspace(1e-3, 50.0, 300)
        exact = LorFit(np.array([0.3]), np.array([2.0]), np.array([1.0]))
        fit = fit_lorentzians(omega, exact.evaluate(omega), 1)
        self.assertLess(fit.residual, 1e-6)
        np.testing.assert_allclose(fit.Omega, [2.0], rtol=1e-4)

    def test_evaluate_is_odd_in_omega(self):
        fit = LorFit(np.array([0.3, 0.1]), np.array([2.0, 5.0]), np.array([1.0, 0.5]))
        self.assertAlmostEqual(fit.evaluate(1.5), -fit.evaluate(-1.5))
        self.assertEqual(fit.evaluate(0.0), 0.0)

    def test_far_tail_evaluates_to_zero(self):
        fit = LorFit(np.array([0.3]), np.array([2.0]), np.array([1.0]))
        with np.errstate(all="raise"):
            np.testing.assert_array_equal(fit.evaluate_over_omega([1e160, 1e200]), 0.0)
            np.testing.assert_array_equal(fit.evaluate_imaginary([1e160]), 0.0)

    def test_imaginary_axis_continuation(self):
        fit = LorFit(np.array([0.3, 0.1]), np.array([2.0, 5.0]), np.array([1.0, 0.5]))
        nu = np.array([0.1, 1.0, 3.0, 40.0])
        expected = sum(4 * p * om * nu / ((nu ** 2 + om ** 2 - ga ** 2) ** 2 + 4 * om ** 2 * ga ** 2)
                       for p, om, ga in fit.terms)
        np.testing.assert_allclose(fit.evaluate_imaginary(nu), expected, rtol=1e-12)
        self.assertTrue(np.all(fit.evaluate_imaginary(nu) > 0))

    def test_spectral_fit_meets_default_tolerance(self):
        settings = FitSettings()
        fit = fit_lorentzian_spectral(reference_params(), settings.n_terms_max, tol=settings.fit_tol_spectral)
        self.assertLessEqual(fit.residual, settings.fit_tol_spectral)
        self.assertTrue(np.all(fit.Gamma > 0))

    def test_uncoupled_bath_gives_empty_fit(self):
        fit = fit_lorentzian_spectral(reference_params(P=0.0), n_terms=3)
        self.assertEqual(fit.n_terms, 0)
        np.testing.assert_array_equal(fit.evaluate([0.5, 1.0]), 0)

    def test_term_count_must_be_positive(self):
        with self.assertRaises(ParameterError):
            fit_lorentzian_spectral(reference_params(), n_terms=0)


class ArtifactTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_expfit_round_trip_is_bit_exact(self):
        fit = ExpFit(np.array([0.1 / 3 + 0.2j]), np.array([-1 / 7 + 0.3j]), 1.234e-9, "c22")
        write_expfit(self.dir / "a.txt", fit)
        loaded = read_expfit(self.dir / "a.txt")
        self.assertEqual(loaded.alpha.tolist(), fit.alpha.tolist())
        self.assertEqual(loaded.gamma.tolist(), fit.gamma.tolist())
        self.assertEqual(loaded.residual, fit.residual)
        self.assertEqual(loaded.name, "c22")
        write_expfit(self.dir / "b.txt", loaded)
        self.assertEqual((self.dir / "a.txt").read_bytes(), (self.dir / "b.txt").read_bytes())

    def test_lorfit_round_trip_is_bit_exact(self):
        fit = LorFit(np.array([0.3, 1 / 3]), np.array([2.0, 0.7]), np.array([1.0, 0.1]), 4e-4)
        write_lorfit(self.dir / "l.txt", fit)
        loaded = read_lorfit(self.dir / "l.txt")
        self.assertEqual(loaded.terms, fit.terms)
        self.assertEqual(loaded.residual, fit.residual)

    def test_empty_fit_round_trip(self):
        write_expfit(self.dir / "e.txt", ExpFit(name="weak"))
        self.assertEqual(read_expfit(self.dir / "e.txt").n_terms, 0)

    def test_malformed_artifacts(self):
        cases = {
            "magic": "lorfit v1 weak 1 0\n0.5 0 -1 0\n",
            "version": "expfit v2 weak 1 0\n0.5 0 -1 0\n",
            "count": "expfit v1 weak 2 0\n0.5 0 -1 0\n",
            "number": "expfit v1 weak 1 0\n0.5 zero -1 0\n",
            "columns": "expfit v1 weak 1 0\n0.5 0 -1\n",
            "growing": "expfit v1 weak 1 0\n0.5 0 0.1 0\n",
        }
        for label, text in cases.items():
            with self.subTest(label):
                path = self.dir / f"{label}.txt"
                path.write_text(text)
                with self.assertRaises(ArtifactError):
                    read_expfit(path)

    def test_missing_artifact(self):
        with self.assertRaises(ArtifactError):
            read_lorfit(self.dir / "absent.txt")
