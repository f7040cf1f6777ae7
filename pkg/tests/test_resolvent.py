""" Tests for the resolvent computations. """

import unittest
from unittest import mock

import numpy as np
import scipy.linalg

from gwlaw.ensemble import EnsembleConfig, SampledMatrix, broken_copy, sample_bipartite, \
    sample_hermitian
from gwlaw.errors import NumericalBreakdown
from gwlaw.profile import BipartiteFactor, VarianceProfile, build_bipartite_profile
from gwlaw.resolvent import check_balancing, covariance_blocks, direct_covariance_inverse, \
    eigen, green_matrix, offdiag_subset, resolvent, resolvent_from_eigen, \
    resolvent_identity_residual
from gwlaw.theory import SpectralPoint, m_sc


class test_Resolvent(unittest.TestCase):
    """ Tests the LU and spectral resolvent paths. """

    def setUp(self) -> None:
        config = EnsembleConfig(master_seed=11, sample_count=2)
        self.sample = sample_bipartite(BipartiteFactor.flat(32), config, 0)
        self.point = SpectralPoint(0.3, 0.05)

    def test_direct_inverse(self):
        """ The LU resolvent agrees with a direct inverse. """
        green = green_matrix(self.sample, self.point)
        direct = np.linalg.inv(self.sample.entries - self.point.z * np.eye(64))
        self.assertLessEqual(np.abs(green - direct).max(), 1e-10)

    def test_eigen_path(self):
        """ The spectral theorem path agrees with the LU path. """
        eig = eigen(self.sample, with_vectors=True)
        lu = resolvent(self.sample, self.point)
        spectral = resolvent_from_eigen(eig, self.point)
        with self.subTest('eigen_residual'):
            self.assertLessEqual(eig.residual(self.sample), 1e-10)
        with self.subTest('full'):
            self.assertLessEqual(np.abs(lu.full_matrix - spectral.full_matrix).max(), 1e-10)
        with self.subTest('subset'):
            subset = resolvent_from_eigen(eig, self.point, keep_full=False)
            rows, cols = subset.offdiag_index
            self.assertLessEqual(np.abs(subset.offdiag_values
                                        - lu.full_matrix[rows, cols]).max(), 1e-10)
            self.assertLessEqual(np.abs(subset.diag - lu.diag).max(), 1e-10)
        with self.subTest('no_vectors'):
            with self.assertRaises(ValueError):
                resolvent_from_eigen(eigen(self.sample), self.point)

    def test_slice(self):
        """ Without the full matrix the errors run over the kept subset only. """
        full = resolvent(self.sample, self.point)
        partial = resolvent(self.sample, self.point, keep_full=False)
        m = m_sc(self.point.z)
        with self.subTest('dropped'):
            self.assertIsNone(partial.full_matrix)
            self.assertEqual(partial.offdiag_values.size, 640)
        with self.subTest('entrywise'):
            self.assertLessEqual(partial.entrywise_error(m), full.entrywise_error(m))
        with self.subTest('averaged'):
            self.assertEqual(partial.averaged_error(m), full.averaged_error(m))
        with self.subTest('trace'):
            self.assertAlmostEqual(full.trace_normalized, np.trace(full.full_matrix) / 64,
                                   places=12)

    def test_identity(self):
        """ G(z1) - G(z2) = (z1 - z2) G(z1) G(z2). """
        residual = resolvent_identity_residual(self.sample, self.point, SpectralPoint(-1.0, 0.2))
        self.assertLessEqual(residual, 1e-10)

    def test_breakdown(self):
        """ A failing factorization is reported as NumericalBreakdown. """
        with mock.patch('scipy.linalg.solve', side_effect=scipy.linalg.LinAlgError('singular')):
            with self.assertRaises(NumericalBreakdown):
                green_matrix(self.sample, self.point)


class test_OffdiagSubset(unittest.TestCase):
    """ Tests the deterministic off-diagonal subset. """

    def test_subset(self):
        """ The subset avoids the diagonal, has 10 dim positions and is repeatable. """
        rows, cols = offdiag_subset(50)
        with self.subTest('size'):
            self.assertEqual(rows.size, 500)
        with self.subTest('offdiagonal'):
            self.assertFalse(np.any(rows == cols))
        with self.subTest('distinct'):
            self.assertEqual(len(set(zip(rows.tolist(), cols.tolist()))), 500)
        with self.subTest('repeatable'):
            again = offdiag_subset(50)
            self.assertTrue(np.array_equal(rows, again[0]) and np.array_equal(cols, again[1]))
        with self.subTest('small'):
            self.assertEqual(offdiag_subset(3)[0].size, 6)


class test_Bipartite(unittest.TestCase):
    """ Tests the covariance blocks and the balancing identity. """

    def setUp(self) -> None:
        config = EnsembleConfig(master_seed=4, sample_count=1)
        self.sample = sample_bipartite(BipartiteFactor.circulant_band(32, 6), config, 0)
        self.point = SpectralPoint(0.5, 0.1)

    def test_covariance_blocks(self):
        """ G_11 = z (X*X - z^2)^-1 and both halves have equal traces. """
        upper, lower = covariance_blocks(self.sample, self.point)
        direct = self.point.z * direct_covariance_inverse(self.sample, self.point.z ** 2)
        with self.subTest('shape'):
            self.assertEqual(upper.shape, (32, 32))
        with self.subTest('g11'):
            self.assertLessEqual(np.abs(upper - direct).max(), 1e-8)
        with self.subTest('traces'):
            self.assertLessEqual(abs(np.trace(upper) - np.trace(lower)), 1e-10)

    def test_balancing(self):
        """ Balancing holds for the sample and breaks for the negative control. """
        with self.subTest('sample'):
            self.assertLessEqual(check_balancing(self.sample, self.point), 1e-12)
        with self.subTest('control'):
            self.assertGreater(check_balancing(broken_copy(self.sample), self.point), 1e-8)

    def test_degenerate(self):
        """ Balancing holds for deterministic X with repeated singular values. """
        half = 8
        phases = np.exp(2j * np.pi * np.arange(half) / half)
        blocks = {
            'identity': np.eye(half),
            'permutation': np.eye(half)[np.random.default_rng(3).permutation(half)],
            'rank_one': np.ones((half, half)) / half,
            'complex_phases': np.diag(phases)[::-1],
        }
        profile = build_bipartite_profile(BipartiteFactor.flat(half))
        for name, x_block in blocks.items():
            entries = np.block([[np.zeros((half, half)), x_block.conj().T],
                                [x_block, np.zeros((half, half))]])
            sample = SampledMatrix(entries, profile, 0, 0, EnsembleConfig(), half)
            for point in (self.point, SpectralPoint(1.0, 0.01), SpectralPoint(-0.2, 1.0)):
                with self.subTest('{0} at {1}'.format(name, point)):
                    self.assertLessEqual(check_balancing(sample, point), 1e-12)

    def test_not_bipartite(self):
        """ Primitive samples have no covariance blocks. """
        sample = sample_hermitian(VarianceProfile.flat(8), EnsembleConfig(), 0)
        with self.subTest('covariance'):
            with self.assertRaises(ValueError):
                covariance_blocks(sample, self.point)
        with self.subTest('balancing'):
            with self.assertRaises(ValueError):
                check_balancing(sample, self.point)


if __name__ == '__main__':
    unittest.main()
