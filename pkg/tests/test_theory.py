""" Tests for the semicircle and Marchenko-Pastur kernels, bounds, domains and Gamma^. """

import unittest

import numpy as np
import scipy.integrate

from gwlaw.profile import BipartiteFactor, VarianceProfile, build_bipartite_profile
from gwlaw.structure import decompose
from gwlaw.theory import DomainParams, SpectralPoint, StabilityOperator, edge_distance, \
    eta_grid, gamma_hat, in_domain, m_mp, m_sc, mp_domain_ok, outside_bound, pi_bound, \
    rho_mp, rho_sc, semicircle_cdf, semicircle_quantile, semicircle_quantiles, z_grid


class test_Semicircle(unittest.TestCase):
    """ Tests m_sc, rho_sc and the semicircle quantiles. """

    def test_self_consistent_equation(self):
        """ m^2 + z m + 1 = 0 and Im m > 0 on a grid of 1000 points. """
        energies = np.linspace(-5.0, 5.0, 50)
        etas = np.geomspace(1e-6, 10.0, 20)
        points = (energies[:, None] + 1j * etas[None, :]).ravel()
        values = m_sc(points)
        with self.subTest('equation'):
            self.assertLessEqual(np.abs(values ** 2 + points * values + 1.0).max(), 1e-12)
        with self.subTest('upper_half_plane'):
            self.assertTrue(np.all(values.imag > 0))
        with self.subTest('bounded'):
            self.assertTrue(np.all(np.abs(values) <= 1.0 + 1e-12))

    def test_scalar(self):
        """ Scalars in, scalars out; m(i) = i (sqrt(5) - 1) / 2. """
        value = m_sc(1j)
        with self.subTest('type'):
            self.assertIsInstance(value, complex)
        with self.subTest('value'):
            self.assertAlmostEqual(value, 1j * (np.sqrt(5.0) - 1.0) / 2.0, places=14)

    def test_stieltjes_inversion(self):
        """ Im m(E + i0) / pi recovers the density. """
        for energy in (0.0, 1.0, -1.5):
            with self.subTest('E={0}'.format(energy)):
                self.assertAlmostEqual(m_sc(energy + 1e-9j).imag / np.pi, rho_sc(energy),
                                       places=6)

    def test_reflection(self):
        """ m(-conj z) = -conj m(z). """
        points = (np.linspace(-4.0, 4.0, 41)[:, None]
                  + 1j * np.geomspace(1e-4, 5.0, 10)[None, :]).ravel()
        np.testing.assert_allclose(m_sc(-points.conj()), -m_sc(points).conj(), atol=1e-13)

    def test_lower_half_plane(self):
        """ Im z <= 0 is rejected. """
        with self.assertRaises(ValueError):
            m_sc(1.0 - 0.1j)

    def test_cdf(self):
        """ The distribution function runs from 0 to 1 with 1/2 at the centre. """
        with self.subTest('left'):
            self.assertEqual(semicircle_cdf(-3.0), 0.0)
        with self.subTest('right'):
            self.assertAlmostEqual(semicircle_cdf(2.0), 1.0, places=14)
        with self.subTest('centre'):
            self.assertAlmostEqual(semicircle_cdf(0.0), 0.5, places=14)

    def test_quantiles(self):
        """ Quantiles are increasing, symmetric and solve F(gamma_alpha) = alpha/(n+1). """
        quantiles = semicircle_quantiles(9)
        with self.subTest('increasing'):
            self.assertTrue(np.all(np.diff(quantiles) > 0))
        with self.subTest('median'):
            self.assertAlmostEqual(quantiles[4], 0.0, places=10)
        with self.subTest('symmetric'):
            self.assertTrue(np.allclose(quantiles, -quantiles[::-1], atol=1e-10))
        with self.subTest('cdf'):
            self.assertTrue(np.allclose(semicircle_cdf(quantiles), np.arange(1, 10) / 10.0,
                                        atol=1e-10))
        with self.subTest('range'):
            with self.assertRaises(ValueError):
                semicircle_quantile(0, 9)


class test_MarchenkoPastur(unittest.TestCase):
    """ Tests m_mp against quadrature of the density. """

    def test_quadrature(self):
        """ m_mp(w) agrees with the integral of rho_mp(x) / (x - w) at 20 points. """
        points = (np.linspace(-1.0, 6.0, 10)[:, None] + 1j * np.array([0.3, 1.5])[None, :])
        for w in points.ravel():
            with self.subTest('w={0}'.format(w)):
                # x = t^2 removes the 1/sqrt(x) singularity at the hard edge
                def integrand(t, part):
                    value = np.sqrt(4.0 - t ** 2) / np.pi / (t ** 2 - w)
                    return value.real if part == 'real' else value.imag
                real = scipy.integrate.quad(integrand, 0.0, 2.0, args=('real',), limit=200)[0]
                imag = scipy.integrate.quad(integrand, 0.0, 2.0, args=('imag',), limit=200)[0]
                self.assertLess(abs(m_mp(w) - complex(real, imag)), 1e-6)

    def test_density(self):
        """ rho_mp vanishes off (0, 4]. """
        with self.subTest('negative'):
            self.assertEqual(rho_mp(-1.0), 0.0)
        with self.subTest('right'):
            self.assertEqual(rho_mp(5.0), 0.0)
        with self.subTest('interior'):
            self.assertAlmostEqual(rho_mp(2.0), 1.0 / (2.0 * np.pi))

    def test_domain(self):
        """ Im w >= sqrt(|Re w|) M^(-1+gamma) and |w| <= 100. """
        with self.subTest('inside'):
            self.assertTrue(mp_domain_ok(2.0 + 0.5j, 64.0))
        with self.subTest('too_close'):
            self.assertFalse(mp_domain_ok(4.0 + 0.001j, 64.0))
        with self.subTest('too_far'):
            self.assertFalse(mp_domain_ok(200.0 + 50.0j, 64.0))


class test_Bounds(unittest.TestCase):
    """ Tests the local law bounds and the spectral domain. """

    def test_pi_bound(self):
        """ Pi(z) = sqrt(Im m / (M eta)) + 1/(M eta). """
        point = SpectralPoint(0.5, 0.1)
        entrywise, averaged = pi_bound(point, 100.0)
        with self.subTest('averaged'):
            self.assertAlmostEqual(averaged, 0.1)
        with self.subTest('entrywise'):
            self.assertAlmostEqual(entrywise, np.sqrt(m_sc(point.z).imag / 10.0) + 0.1)

    def test_edge_distance(self):
        """ kappa is the distance to the nearer edge. """
        with self.subTest('right'):
            self.assertAlmostEqual(edge_distance(2.5), 0.5)
        with self.subTest('left'):
            self.assertAlmostEqual(edge_distance(-3.0), 1.0)

    def test_outside_bound(self):
        """ The outside bound is finite outside the bulk and rejects points inside it. """
        with self.subTest('value'):
            bound = outside_bound(SpectralPoint(3.0, 1.0), 100.0)
            self.assertAlmostEqual(bound, 1.0 / 200.0 + 1.0 / (1e4 * np.sqrt(2.0)))
        with self.subTest('bulk'):
            with self.assertRaisesRegex(ValueError, '< 2'):
                outside_bound(SpectralPoint(1.0, 1.0), 100.0)
        with self.subTest('eta'):
            with self.assertRaises(ValueError):
                outside_bound(SpectralPoint(2.0, 1e-4), 100.0)

    def test_domain(self):
        """ D(gamma) needs eta >= M^(-1+gamma) and |z| <= 10. """
        params = DomainParams(gamma=0.3, m_bound=64.0)
        with self.subTest('eta_min'):
            self.assertAlmostEqual(params.eta_min, 64.0 ** -0.7)
        with self.subTest('inside'):
            self.assertTrue(in_domain(SpectralPoint(0.0, 0.1), params))
        with self.subTest('below'):
            self.assertFalse(in_domain(SpectralPoint(0.0, 0.01), params))
        with self.subTest('far'):
            self.assertFalse(in_domain(SpectralPoint(11.0, 1.0), params))
        with self.subTest('gamma'):
            with self.assertRaises(ValueError):
                DomainParams(gamma=1.0, m_bound=64.0)
        with self.subTest('eta_positive'):
            with self.assertRaises(ValueError):
                SpectralPoint(0.0, 0.0)

    def test_grid(self):
        """ The grid is the product of energies and etas, etas varying fastest. """
        etas = eta_grid(DomainParams(0.3, 64.0), 3)
        points = z_grid([-1.0, 1.0], etas)
        with self.subTest('count'):
            self.assertEqual(len(points), 6)
        with self.subTest('order'):
            self.assertEqual([point.E for point in points[:3]], [-1.0] * 3)
        with self.subTest('range'):
            self.assertAlmostEqual(etas[0], 64.0 ** -0.7)
            self.assertAlmostEqual(etas[-1], 1.0)


class test_StabilityOperator(unittest.TestCase):
    """ Tests the deflated stability norm Gamma^. """

    def test_flat(self):
        """ For flat profiles S vanishes off span{e, f}, so Gamma^ is the norm of Q. """
        profile = build_bipartite_profile(BipartiteFactor.flat(16))
        stability = StabilityOperator(profile, decompose(profile))
        for energy in (-1.0, 0.0, 1e-3):
            with self.subTest('E={0}'.format(energy)):
                self.assertAlmostEqual(stability.gamma_hat(SpectralPoint(energy, 0.01)),
                                       stability.projector_norm(), places=10)

    def test_band(self):
        """ Gamma^ of a band bipartite profile is finite at and near z = 0. """
        profile = build_bipartite_profile(BipartiteFactor.circulant_band(32, 8))
        decomposition = decompose(profile)
        stability = StabilityOperator(profile, decomposition)
        for point in (SpectralPoint(0.0, 0.05), SpectralPoint(1e-3, 0.05),
                      SpectralPoint(1.9, 0.05)):
            with self.subTest(str(point)):
                value = stability.gamma_hat(point)
                self.assertTrue(np.isfinite(value))
                self.assertGreater(value, 0.0)
                self.assertAlmostEqual(gamma_hat(point, profile, decomposition), value)

    def test_far_away(self):
        """ Far from the spectrum m^2 vanishes, so Gamma^ tends to the norm of Q. """
        profile = build_bipartite_profile(BipartiteFactor.circulant_band(32, 8))
        stability = StabilityOperator(profile, decompose(profile))
        self.assertAlmostEqual(stability.gamma_hat(SpectralPoint(0.0, 1e6)),
                               stability.projector_norm(), places=9)

    def test_mismatch(self):
        """ Profile and decomposition have to agree in dimension. """
        with self.assertRaises(ValueError):
            StabilityOperator(VarianceProfile.flat(4), decompose(VarianceProfile.flat(5)))


if __name__ == '__main__':
    unittest.main()
