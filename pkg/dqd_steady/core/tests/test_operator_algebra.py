import numpy as np
from django.test import SimpleTestCase

from core.services.model import IDENTITY, RHO_LEFT, SIGMA_X, SIGMA_Y, SIGMA_Z
from core.services.operator_algebra import (
    batch_density_checks, commutator_superop, density_checks, devectorize, vec_adjoint, vectorize,
)

RNG = np.random.default_rng(7)


def random_operator():
    return RNG.normal(size=(2, 2)) + 1j * RNG.normal(size=(2, 2))


class VectorizationTests(SimpleTestCase):
    def test_column_major_order(self):
        a = np.array([[1, 2], [3, 4]], dtype=complex)
        np.testing.assert_array_equal(vectorize(a), [1, 3, 2, 4])
        np.testing.assert_array_equal(devectorize(vectorize(a)), a)

    def test_commutator_superop_matches_matrix_commutator(self):
        x = random_operator()
        for op in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            with self.subTest(op=op.tolist()):
                expected = -1j * (op @ x - x @ op)
                np.testing.assert_allclose(devectorize(commutator_superop(op) @ vectorize(x)), expected)

    def test_commutator_superop_scale(self):
        x = random_operator()
        result = devectorize(commutator_superop(SIGMA_Z, scale=0.5) @ vectorize(x))
        np.testing.assert_allclose(result, 0.5 * (SIGMA_Z @ x - x @ SIGMA_Z))

    def test_left_multiplication_identity(self):
        x = random_operator()
        left = np.kron(IDENTITY, SIGMA_Z)
        np.testing.assert_allclose(devectorize(left @ vectorize(x)), SIGMA_Z @ x)

    def test_vec_adjoint(self):
        x = random_operator()
        np.testing.assert_allclose(vec_adjoint(vectorize(x)), vectorize(x.conj().T))
        stacked = np.stack([vectorize(x), vectorize(2 * x)])
        np.testing.assert_allclose(vec_adjoint(stacked)[1], vectorize(2 * x.conj().T))


class DensityCheckTests(SimpleTestCase):
    def test_pure_state(self):
        report = density_checks(RHO_LEFT)
        self.assertAlmostEqual(report.trace, 1.0)
        self.assertEqual(report.herm_defect, 0.0)
        self.assertAlmostEqual(report.eig_min, 0.0)
        self.assertAlmostEqual(report.eig_max, 1.0)

    def test_negative_eigenvalue_is_reported(self):
        rho = np.array([[0.5, 0.6], [0.6, 0.5]], dtype=complex)
        report = density_checks(rho)
        self.assertAlmostEqual(report.eig_min, -0.1)
        self.assertAlmostEqual(report.eig_max, 1.1)

    def test_hermiticity_defect(self):
        rho = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        self.assertAlmostEqual(density_checks(rho).herm_defect, 0.2)

    def test_batch_matches_single(self):
        rhos = np.stack([random_operator() for _ in range(5)])
        rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, 1, 2)))
        traces, herm, eig_min, eig_max = batch_density_checks(rhos)
        for i, rho in enumerate(rhos):
            single = density_checks(rho)
            self.assertAlmostEqual(traces[i], single.trace)
            self.assertAlmostEqual(herm[i], single.herm_defect)
            self.assertAlmostEqual(eig_min[i], single.eig_min)
            self.assertAlmostEqual(eig_max[i], single.eig_max)
        np.testing.assert_allclose(eig_min, np.linalg.eigvalsh(rhos)[:, 0], atol=1e-12)
