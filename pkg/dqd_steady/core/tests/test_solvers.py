import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import IntegrationError, ParameterError
from core.services.expfit import ExpFit
from core.services.integrator import TRAJECTORY_COLUMNS, Trajectory, sample_grid
from core.services.model import RHO_LEFT, RHO_RIGHT, SIGMA_X, drive_amplitude
from core.services.operator_algebra import devectorize, vectorize
from core.services.polaron_solver import PolaronSolver, integrate_polaron, population_right
from core.services.reference import unitary_reference
from core.services.weak_solver import WeakSolver, integrate_weak

from .test_model import reference_params

NO_TERMS = ExpFit()
WEAK_FIT = ExpFit(np.array([0.05 + 0j]), np.array([-1.0 + 0j]), name="weak")
C11_FIT = ExpFit(np.array([0.3 + 0j]), np.array([-1.0 + 0j]), name="c11")
C22_FIT = ExpFit(np.array([0.2 + 0j]), np.array([-0.8 + 0j]), name="c22")
ETA = 0.8


def coupled_params(**changes):
    values = dict(epsilon=0.4, delta=0.6, Omega0=0.034)
    values.update(changes)
    return reference_params(**values)


def random_state(solver, seed=3):
    rng = np.random.default_rng(seed)
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    y = solver.initial_state(rho)
    y[4:] = rng.normal(size=y.size - 4) + 1j * rng.normal(size=y.size - 4)
    return y


class RightHandSideTests(SimpleTestCase):
    def test_weak_auxiliary_source(self):
        solver = WeakSolver(coupled_params(), WEAK_FIT)
        dy = solver.rhs(0.0, solver.initial_state(RHO_LEFT))
        np.testing.assert_allclose(dy[4:], -1j * 0.05 * vectorize(RHO_LEFT))

    def test_polaron_auxiliary_source(self):
        p = coupled_params()
        solver = PolaronSolver(p, ETA, C11_FIT, C22_FIT)
        dy = solver.rhs(0.0, solver.initial_state(RHO_LEFT))
        expected = 1j * 0.3 * 0.5 * drive_amplitude(p, 0.0) * vectorize(SIGMA_X)
        np.testing.assert_allclose(dy[4:8], expected)
        self.assertEqual(solver.dim, 12)

    def test_density_derivative_is_traceless_and_hermitian(self):
        p = coupled_params()
        for solver in (WeakSolver(p, WEAK_FIT), PolaronSolver(p, ETA, C11_FIT, C22_FIT)):
            with self.subTest(solver=solver.method.value):
                drho = devectorize(solver.rhs(1.3, random_state(solver))[:4])
                self.assertAlmostEqual(abs(np.trace(drho)), 0.0, places=12)
                np.testing.assert_allclose(drho, drho.conj().T, atol=1e-12)

    def test_population_right_is_frame_independent(self):
        rho = np.array([[0.3, 0.1j], [-0.1j, 0.7]])
        self.assertEqual(population_right(rho), 0.7)
        np.testing.assert_array_equal(population_right(np.stack([RHO_LEFT, RHO_RIGHT])), [0.0, 1.0])

    def test_eta_outside_unit_interval(self):
        with self.assertRaises(ParameterError):
            PolaronSolver(coupled_params(), 1.2, C11_FIT, C22_FIT)
        with self.assertRaises(ParameterError):
            PolaronSolver(coupled_params(), ETA, C11_FIT, C22_FIT, strategy="sequential")


class ClosedSystemTests(SimpleTestCase):
    def test_rabi_transfer(self):
        p = reference_params(epsilon=0.0, Omega0=0.0, P=0.0)
        t_end = math.pi / 0.15
        for traj in (integrate_weak(p, NO_TERMS, t_end=t_end),
                     integrate_polaron(p, 1.0, NO_TERMS, NO_TERMS, t_end=t_end)):
            self.assertAlmostEqual(traj.population_right[-1], 1.0, delta=1e-6)
            self.assertAlmostEqual(traj.population_right[0], 0.0)

    def test_matches_unitary_reference(self):
        p = reference_params(epsilon=0.4, P=0.0)
        times = np.linspace(0.0, 50.0, 51)
        expected = unitary_reference(p, [1.0, 0.0], times, dt=1e-3)
        weak = integrate_weak(p, NO_TERMS, t_end=50.0, t_eval=times)
        polaron = integrate_polaron(p, 1.0, NO_TERMS, NO_TERMS, t_end=50.0, t_eval=times)
        np.testing.assert_allclose(weak.population_right, expected, atol=1e-6)
        np.testing.assert_allclose(polaron.population_right, expected, atol=1e-6)

    def test_unitary_reference_rejects_bad_times(self):
        p = reference_params(P=0.0)
        with self.assertRaises(ParameterError):
            unitary_reference(p, [1.0, 0.0], [1.0, 0.5])
        with self.assertRaises(ParameterError):
            unitary_reference(p, [1.0, 0.0], [1.0], dt=0.0)

    def test_no_tunneling_keeps_populations(self):
        p = coupled_params(delta=0.0, Omega0=0.0)
        traj = integrate_polaron(p, ETA, C11_FIT, C22_FIT, t_end=1000.0, samples=101)
        np.testing.assert_allclose(traj.population_right, 0.0, atol=1e-10)


class IntegrationPropertyTests(SimpleTestCase):
    def test_linearity_in_initial_state(self):
        p = coupled_params()
        solver = WeakSolver(p, WEAK_FIT)
        left = solver.integrate(RHO_LEFT, 30.0, 31).population_right
        right = solver.integrate(RHO_RIGHT, 30.0, 31).population_right
        mixed = solver.integrate(0.3 * RHO_LEFT + 0.7 * RHO_RIGHT, 30.0, 31).population_right
        np.testing.assert_allclose(mixed, 0.3 * left + 0.7 * right, atol=1e-7)

    def test_frozen_strategy_matches_joint(self):
        p = coupled_params()
        joint = integrate_polaron(p, ETA, C11_FIT, C22_FIT, t_end=40.0, samples=41)
        frozen = integrate_polaron(p, ETA, C11_FIT, C22_FIT, t_end=40.0, samples=41, strategy="frozen")
        np.testing.assert_allclose(frozen.population_right, joint.population_right, atol=1e-6)

    def test_semigroup_restart(self):
        p = coupled_params()
        for solver in (WeakSolver(p, WEAK_FIT), PolaronSolver(p, ETA, C11_FIT, C22_FIT)):
            with self.subTest(solver=solver.method.value):
                y0 = solver.initial_state()
                direct, _ = solver.advance(y0, 0.0, 20.0)
                half, _ = solver.advance(y0, 0.0, 8.0)
                restarted, _ = solver.advance(half, 8.0, 20.0)
                np.testing.assert_allclose(restarted, direct, atol=1e-7)

    def test_end_state_is_taken_at_t1(self):
        p = coupled_params()
        solvers = (WeakSolver(p, WEAK_FIT), PolaronSolver(p, ETA, C11_FIT, C22_FIT),
                   PolaronSolver(p, ETA, C11_FIT, C22_FIT, strategy="frozen"))
        t1 = 100.0
        short = np.linspace(0.0, t1 * (1 - 5e-6), 11)
        for solver in solvers:
            with self.subTest(solver=solver.method.value, strategy=getattr(solver, "strategy", None)):
                y0 = solver.initial_state()
                end, _ = solver.advance(y0, 0.0, t1)
                end_short, states = solver.advance(y0, 0.0, t1, short)
                self.assertEqual(states.shape[1], short.size)
                np.testing.assert_allclose(end_short, end, rtol=0, atol=1e-9)
                overshoot = np.append(short[:-1], t1 * (1 + 1e-15))
                _, states = solver.advance(y0, 0.0, t1, overshoot)
                self.assertEqual(states.shape[1], overshoot.size)

    def test_sample_grid(self):
        grid, extra = sample_grid([0.0, 0.5, 1.0 - 1e-9], 0.0, 1.0)
        self.assertTrue(extra)
        self.assertEqual(grid[-1], 1.0)
        grid, extra = sample_grid([0.0, 1.0 + 1e-12], 0.0, 1.0)
        self.assertFalse(extra)
        np.testing.assert_array_equal(grid, [0.0, 1.0])
        self.assertEqual(sample_grid(None, 0.0, 1.0), (None, False))

    def test_trace_is_preserved(self):
        traj = integrate_weak(coupled_params(), WEAK_FIT, t_end=30.0, samples=61)
        self.assertLess(traj.max_trace_defect, 1e-8)
        self.assertLess(traj.max_herm_defect, 1e-8)

    def test_failed_integration_raises(self):
        failure = mock.Mock(status=-1, t=np.array([0.0, 1.5]), nfev=42, message="Required step size is less than spacing")
        solver = WeakSolver(coupled_params(), WEAK_FIT)
        with mock.patch("core.services.integrator.solve_ivp", return_value=failure):
            with self.assertRaises(IntegrationError) as ctx:
                solver.integrate(RHO_LEFT, 10.0)
        self.assertEqual(ctx.exception.diagnostics["t"], 1.5)


class TrajectoryTests(SimpleTestCase):
    def test_times_must_increase(self):
        rhos = np.stack([RHO_LEFT, RHO_LEFT])
        with self.assertRaises(ParameterError):
            Trajectory.from_states([1.0, 0.5], rhos)

    def test_frame_columns(self):
        traj = Trajectory.from_states([0.0, 1.0], np.stack([RHO_LEFT, RHO_RIGHT]))
        frame = traj.to_frame()
        self.assertEqual(list(frame.columns), TRAJECTORY_COLUMNS)
        self.assertEqual(frame["population_right"].tolist(), [0.0, 1.0])
        self.assertEqual(frame["trace_re"].tolist(), [1.0, 1.0])
