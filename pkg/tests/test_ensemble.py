""" Tests for the seeded ensembles. """

import os
import tempfile
import unittest

import numpy as np
import pytest

from gwlaw.ensemble import EnsembleConfig, broken_copy, empirical_moments, sample_bipartite, \
    sample_generator, sample_hermitian, semicircle_ks_distance
from gwlaw.kinds import Distribution, SymmetryClass
from gwlaw.profile import BipartiteFactor, VarianceProfile, build_bipartite_profile


class test_EnsembleConfig(unittest.TestCase):
    """ Tests the validation of ensemble configurations. """

    def test_rejects(self):
        """ Empty ensembles, bad seeds and complex real-symmetric draws are rejected. """
        with self.subTest('samples'):
            with self.assertRaises(ValueError):
                EnsembleConfig(sample_count=0)
        with self.subTest('seed'):
            with self.assertRaises(ValueError):
                EnsembleConfig(master_seed=-1)
        with self.subTest('seed_width'):
            with self.assertRaises(ValueError):
                EnsembleConfig(master_seed=2 ** 64)
        with self.subTest('complex'):
            with self.assertRaises(ValueError):
                EnsembleConfig(Distribution.COMPLEX_GAUSSIAN, SymmetryClass.REAL_SYMMETRIC)


class test_Sampling(unittest.TestCase):
    """ Tests sample_hermitian and sample_bipartite. """

    def setUp(self) -> None:
        self.profile = build_bipartite_profile(BipartiteFactor.flat(16))
        self.config = EnsembleConfig(master_seed=2024, sample_count=8)

    def test_determinism(self):
        """ A sample depends only on (master_seed, index), not on the drawing order. """
        forward = [sample_hermitian(self.profile, self.config, index) for index in range(8)]
        backward = [sample_hermitian(self.profile, self.config, index)
                    for index in reversed(range(8))][::-1]
        with self.subTest('order'):
            for first, second in zip(forward, backward):
                self.assertTrue(np.array_equal(first.entries, second.entries))
                self.assertEqual(first.seed_used, second.seed_used)
        with self.subTest('distinct'):
            self.assertFalse(np.array_equal(forward[0].entries, forward[1].entries))
        with self.subTest('master_seed'):
            other = sample_hermitian(self.profile, EnsembleConfig(master_seed=2025,
                                                                  sample_count=8), 0)
            self.assertFalse(np.array_equal(other.entries, forward[0].entries))

    def test_index_range(self):
        """ Indices outside [0, sample_count) are rejected. """
        with self.assertRaises(ValueError):
            sample_hermitian(self.profile, self.config, 8)

    def test_zero_pattern(self):
        """ Entries with s_ij = 0 are exactly zero and H is exactly Hermitian. """
        sample = sample_hermitian(self.profile, self.config, 3)
        with self.subTest('hermitian'):
            self.assertTrue(np.array_equal(sample.entries, sample.entries.conj().T))
        with self.subTest('zero_blocks'):
            self.assertFalse(np.any(sample.entries[:16, :16]))
            self.assertFalse(np.any(sample.entries[16:, 16:]))
        with self.subTest('half'):
            self.assertEqual(sample.half, 16)
        with self.subTest('primitive_half'):
            self.assertIsNone(sample_hermitian(VarianceProfile.flat(6), self.config, 0).half)

    def test_complex(self):
        """ Complex Hermitian draws have a real diagonal. """
        config = EnsembleConfig(Distribution.COMPLEX_GAUSSIAN, SymmetryClass.HERMITIAN,
                                master_seed=5, sample_count=1)
        sample = sample_hermitian(VarianceProfile.flat(12), config, 0)
        with self.subTest('hermitian'):
            self.assertTrue(np.array_equal(sample.entries, sample.entries.conj().T))
        with self.subTest('real_diagonal'):
            self.assertFalse(np.any(np.diag(sample.entries).imag))
        with self.subTest('complex'):
            self.assertTrue(np.any(sample.entries.imag))

    def test_bipartite(self):
        """ sample_bipartite draws [[0, X*], [X, 0]] with X of size d. """
        sample = sample_bipartite(BipartiteFactor.circulant_band(16, 2), self.config, 1)
        with self.subTest('shape'):
            self.assertEqual(sample.x_block.shape, (16, 16))
        with self.subTest('support'):
            self.assertEqual(int(np.count_nonzero(sample.x_block)), 16 * 5)
        with self.subTest('linearization'):
            self.assertTrue(np.array_equal(sample.entries[:16, 16:], sample.x_block.conj().T))
        with self.subTest('no_block'):
            with self.assertRaises(ValueError):
                _ = sample_hermitian(VarianceProfile.flat(6), self.config, 0).x_block

    def test_symmetric_spectrum(self):
        """ The spectrum of a bipartite sample is symmetric under lambda -> -lambda. """
        complex_config = EnsembleConfig(Distribution.COMPLEX_GAUSSIAN, SymmetryClass.HERMITIAN,
                                        master_seed=6, sample_count=2)
        cases = {
            'real': sample_bipartite(BipartiteFactor.circulant_band(16, 2), self.config, 0),
            'complex': sample_bipartite(BipartiteFactor.flat(12), complex_config, 1),
            'hermitian_draw': sample_hermitian(self.profile, self.config, 5),
        }
        for name, sample in cases.items():
            with self.subTest(name):
                eigenvalues = np.linalg.eigvalsh(sample.entries)
                np.testing.assert_allclose(eigenvalues, -eigenvalues[::-1], atol=1e-12)

    def test_seeds(self):
        """ The derived seed is a pure function of the master seed and the index. """
        first = sample_generator(7, 3)[1]
        with self.subTest('repeatable'):
            self.assertEqual(sample_generator(7, 3)[1], first)
        with self.subTest('index'):
            self.assertNotEqual(sample_generator(7, 4)[1], first)

    def test_to_file(self):
        """ The dump carries the dimension and seeds in its header. """
        sample = sample_hermitian(self.profile, self.config, 2)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'sample.txt')
            sample.to_file(path)
            with open(path) as handle:
                header = handle.readline().split()
            entries = np.loadtxt(path, skiprows=1)
        with self.subTest('header'):
            self.assertEqual(header[:3], ['32', str(sample.seed_used), '2'])
        with self.subTest('entries'):
            self.assertTrue(np.array_equal(entries, sample.entries))


class test_Moments(unittest.TestCase):
    """ Tests the empirical moment ratios and the semicircle fit. """

    def test_gaussian(self):
        """ Real Gaussian entries have second ratio 1 and fourth ratio 3. """
        config = EnsembleConfig(master_seed=1, sample_count=20)
        profile = VarianceProfile.flat(64)
        moments = empirical_moments([sample_hermitian(profile, config, index)
                                     for index in range(20)])
        with self.subTest('second'):
            self.assertLess(abs(moments['second_ratio'] - 1.0), 0.05)
        with self.subTest('fourth'):
            self.assertLess(abs(moments['fourth_ratio'] - 3.0), 0.3)
        with self.subTest('samples'):
            self.assertEqual(moments['samples'], 20)

    def test_complex_classes(self):
        """ Complex off-diagonal entries have fourth ratio 2, the real diagonal keeps 3. """
        config = EnsembleConfig(Distribution.COMPLEX_GAUSSIAN, SymmetryClass.HERMITIAN,
                                master_seed=4, sample_count=4000)
        profile = VarianceProfile.flat(4)
        moments = empirical_moments([sample_hermitian(profile, config, index)
                                     for index in range(4000)])
        with self.subTest('off_diagonal'):
            self.assertLess(abs(moments['second_ratio'] - 1.0), 0.05)
            self.assertLess(abs(moments['fourth_ratio'] - 2.0), 0.15)
        with self.subTest('diagonal'):
            self.assertLess(abs(moments['diagonal_second_ratio'] - 1.0), 0.1)
            self.assertLess(abs(moments['diagonal_fourth_ratio'] - 3.0), 0.4)

    def test_bernoulli(self):
        """ Symmetric Bernoulli entries have |h|^2 = s exactly. """
        config = EnsembleConfig(Distribution.SYMMETRIC_BERNOULLI, master_seed=1, sample_count=3)
        profile = build_bipartite_profile(BipartiteFactor.circulant_band(16, 3))
        moments = empirical_moments([sample_hermitian(profile, config, index)
                                     for index in range(3)])
        with self.subTest('second'):
            assert moments['second_ratio'] == pytest.approx(1.0, abs=1e-12)
        with self.subTest('fourth'):
            assert moments['fourth_ratio'] == pytest.approx(1.0, abs=1e-12)
        with self.subTest('no_diagonal'):
            self.assertTrue(np.isnan(moments['diagonal_second_ratio']))

    def test_empty(self):
        """ Moments need at least one sample. """
        with self.assertRaises(ValueError):
            empirical_moments([])

    def test_semicircle(self):
        """ The spectrum of a flat sample of dim 256 is close to the semicircle. """
        config = EnsembleConfig(master_seed=3, sample_count=1)
        sample = sample_hermitian(VarianceProfile.flat(256), config, 0)
        self.assertLess(semicircle_ks_distance(np.linalg.eigvalsh(sample.entries)), 0.1)


class test_BrokenCopy(unittest.TestCase):
    """ Tests the negative control copy. """

    def test_broken_copy(self):
        """ The copy gains an entry in a diagonal block, the original is untouched. """
        config = EnsembleConfig(master_seed=9, sample_count=1)
        sample = sample_bipartite(BipartiteFactor.flat(8), config, 0)
        broken = broken_copy(sample)
        with self.subTest('entry'):
            self.assertEqual(broken.entries[0, 1], 0.5)
            self.assertEqual(broken.entries[1, 0], 0.5)
        with self.subTest('original'):
            self.assertFalse(np.any(sample.entries[:8, :8]))
        with self.subTest('metadata'):
            self.assertEqual(broken.seed_used, sample.seed_used)
        with self.subTest('primitive'):
            with self.assertRaises(ValueError):
                broken_copy(sample_hermitian(VarianceProfile.flat(4), config, 0))


if __name__ == '__main__':
    unittest.main()
