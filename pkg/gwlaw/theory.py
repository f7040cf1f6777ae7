""" Deterministic analytic kernel of the local laws.

Holds the semicircle and Marchenko-Pastur densities and Stieltjes transforms,
the semicircle quantiles, the spectral domain D(gamma), the error bounds of the
local laws and the stability norm Gamma^ of (1 - m(z)^2 S)^-1 deflated off the
+1/-1 eigendirections e and f of S.

Example usage::

    point = SpectralPoint(E=0.0, eta=0.01)
    entrywise, averaged = pi_bound(point, M=512)
    stability = StabilityOperator(profile, decompose(profile))
    print(m_sc(point.z), entrywise, stability.gamma_hat(point))

"""

import logging
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from gwlaw.errors import NumericalBreakdown
from gwlaw.kinds import BlockKind
from gwlaw.profile import VarianceProfile
from gwlaw.structure import BlockDecomposition

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.3
DOMAIN_RADIUS = 10.0
MP_DOMAIN_RADIUS = 100.0
QUANTILE_XTOL = 1e-12

ComplexLike = Union[complex, np.ndarray]


@dataclass(frozen=True)
class SpectralPoint:
    """ A spectral parameter z = E + i*eta with eta > 0. """
    E: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError('Spectral points need eta > 0, got {0!r}'.format(self.eta))

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)

    @classmethod
    def from_complex(cls, z: complex):
        return cls(float(np.real(z)), float(np.imag(z)))


@dataclass(frozen=True)
class DomainParams:
    """ Parameters gamma and M of the spectral domain D(gamma). """
    gamma: float
    m_bound: float

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError('gamma has to lie in (0, 1), got {0!r}'.format(self.gamma))
        if not self.m_bound > 0:
            raise ValueError('M has to be positive, got {0!r}'.format(self.m_bound))

    @property
    def eta_min(self) -> float:
        return self.m_bound ** (-1.0 + self.gamma)


def _upper(values: ComplexLike, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if np.any(values.imag <= 0):
        raise ValueError('{0} needs Im > 0'.format(name))
    return values


def m_sc(z: ComplexLike) -> ComplexLike:
    """
    Stieltjes transform of the semicircle law, the root of m^2 + z m + 1 = 0 with
    Im m > 0.

    The square root sqrt(z^2 - 4) is taken as sqrt(z - 2) * sqrt(z + 2) with
    principal branches, and m = -2 / (z + sqrt(z^2 - 4)) avoids the cancellation
    of (-z + sqrt(z^2 - 4)) / 2 at large |z|.

    Args:
        z: Spectral parameter(s) with Im z > 0.
    Returns:
        m(z), scalar or array matching the input.
    Raises:
        ValueError
    """
    values = _upper(z, 'm_sc')
    root = np.sqrt(values - 2.0) * np.sqrt(values + 2.0)
    result = -2.0 / (values + root)
    return complex(result) if result.ndim == 0 else result


def rho_sc(x):
    """ Semicircle density (2 pi)^-1 sqrt(max(4 - x^2, 0)). """
    x = np.asarray(x, dtype=float)
    result = np.sqrt(np.maximum(4.0 - x ** 2, 0.0)) / (2.0 * np.pi)
    return float(result) if result.ndim == 0 else result


def semicircle_cdf(x):
    """ Closed-form distribution function of the semicircle law. """
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    result = 0.5 + x * np.sqrt(4.0 - x ** 2) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi
    return float(result) if result.ndim == 0 else result


def m_mp(w: ComplexLike) -> ComplexLike:
    """
    Stieltjes transform of the Marchenko-Pastur law of the hard-edge case,
    m_mp(w) = m_sc(z) / z with z the square root of w in the upper half-plane.

    Raises:
        ValueError
    """
    values = _upper(w, 'm_mp')
    root = np.sqrt(values)
    result = m_sc(root) / root
    return complex(result) if np.ndim(result) == 0 else result


def rho_mp(x):
    """ Marchenko-Pastur density (2 pi)^-1 sqrt(max(4 - x, 0) / x) for x > 0, else 0. """
    x = np.asarray(x, dtype=float)
    positive = np.where(x > 0, x, 1.0)
    result = np.where(x > 0, np.sqrt(np.maximum(4.0 - x, 0.0) / positive) / (2.0 * np.pi), 0.0)
    return float(result) if result.ndim == 0 else result


def semicircle_quantile(alpha: int, n: int) -> float:
    """
    The alpha-th of n semicircle quantiles, solving
    int_{-2}^{gamma_alpha} rho_sc = alpha / (n + 1) by bisection.

    Args:
        alpha: Index with 1 <= alpha <= n.
        n: Number of quantiles.
    Returns:
        gamma_alpha to within 1e-12.
    Raises:
        ValueError
    """
    if not 1 <= alpha <= n:
        raise ValueError('Quantile index {0} out of range [1, {1}]'.format(alpha, n))
    target = alpha / (n + 1.0)
    return float(scipy.optimize.bisect(lambda x: semicircle_cdf(x) - target, -2.0, 2.0,
                                       xtol=QUANTILE_XTOL))


def semicircle_quantiles(n: int) -> np.ndarray:
    """ All n semicircle quantiles gamma_1 < ... < gamma_n. """
    return np.array([semicircle_quantile(alpha, n) for alpha in range(1, n + 1)])


def pi_bound(z: SpectralPoint, M: float) -> Tuple[float, float]:
    """
    Bounds of the entrywise and averaged local laws.

    Returns:
        (sqrt(Im m(z) / (M eta)) + 1/(M eta), 1/(M eta))
    """
    if not M > 0:
        raise ValueError('M has to be positive!')
    scale = M * z.eta
    return float(np.sqrt(m_sc(z.z).imag / scale) + 1.0 / scale), float(1.0 / scale)


def edge_distance(E: float) -> float:
    """ kappa = min(|E - 2|, |E + 2|), the distance of E from the spectral edges. """
    return min(abs(E - 2.0), abs(E + 2.0))


def outside_bound(z: SpectralPoint, M: float, gamma: float = DEFAULT_GAMMA) -> float:
    """
    Averaged local law bound outside the spectrum,
    1/(M(kappa + eta)) + 1/((M eta)^2 sqrt(kappa + eta)).

    Args:
        z: Spectral point with |E| >= 2 and eta sqrt(kappa + eta) >= M^(-1+gamma).
        M: The bound M.
        gamma: The domain exponent.
    Returns:
        The bound.
    Raises:
        ValueError: naming every violated constraint.
    """
    kappa = edge_distance(z.E)
    failures = []
    if abs(z.E) < 2.0:
        failures.append('|E| = {0!r} < 2'.format(abs(z.E)))
    if z.eta * np.sqrt(kappa + z.eta) < M ** (-1.0 + gamma):
        failures.append('eta*sqrt(kappa+eta) = {0!r} < M^(-1+gamma) = {1!r}'.format(
            z.eta * np.sqrt(kappa + z.eta), M ** (-1.0 + gamma)))
    if failures:
        raise ValueError('Point {0} outside the domain of the outside bound: {1}'.format(
            z, '; '.join(failures)))
    return float(1.0 / (M * (kappa + z.eta)) + 1.0 / ((M * z.eta) ** 2 * np.sqrt(kappa + z.eta)))


def outside_domain_ok(z: SpectralPoint, M: float, gamma: float = DEFAULT_GAMMA) -> bool:
    """ True iff |E| >= 2 and eta sqrt(kappa + eta) >= M^(-1+gamma). """
    kappa = edge_distance(z.E)
    return bool(abs(z.E) >= 2.0 and z.eta * np.sqrt(kappa + z.eta) >= M ** (-1.0 + gamma))


def in_domain(z: SpectralPoint, params: DomainParams) -> bool:
    """ True iff |z| <= 10 and eta >= M^(-1+gamma). """
    return bool(abs(z.z) <= DOMAIN_RADIUS and z.eta >= params.eta_min)


def mp_domain_ok(w: complex, M: float, gamma: float = DEFAULT_GAMMA) -> bool:
    """ True iff |w| <= 100 and Im w >= sqrt(|Re w|) M^(-1+gamma). """
    return bool(abs(w) <= MP_DOMAIN_RADIUS
                and w.imag >= np.sqrt(abs(w.real)) * M ** (-1.0 + gamma))


def energy_grid(lower: float, upper: float, count: int) -> np.ndarray:
    return np.linspace(lower, upper, count)


def eta_grid(params: DomainParams, count: int, upper: float = 1.0) -> np.ndarray:
    """ Geometric grid in eta from M^(-1+gamma) to ``upper``. """
    return np.geomspace(params.eta_min, upper, count)


def z_grid(energies, etas) -> List[SpectralPoint]:
    """ Cartesian product of energies and etas, etas varying fastest. """
    return [SpectralPoint(float(E), float(eta)) for E in energies for eta in etas]


class StabilityOperator:
    """ The operators (1 - m^2 S)^-1 of a profile, deflated block by block.

    Bipartite blocks are deflated off span{e, f}, primitive blocks off span{e}.
    On the deflated directions 1 - m^2 S is replaced by the identity, which
    commutes with the projector Q, so K^-1 Q equals the restricted inverse.

    Attributes:
        profile: The variance profile.
        decomposition: Its block decomposition.
        tol: Smallest admissible |1 - m^2 lambda| on the complement.
    Raises:
        ValueError
    """

    def __init__(self, profile: VarianceProfile, decomposition: BlockDecomposition,
                 tol: float = 1e-12):
        if profile.dim != decomposition.dim:
            raise ValueError('Decomposition of dim {0} does not match profile of dim {1}'.format(
                decomposition.dim, profile.dim))
        self.profile = profile
        self.decomposition = decomposition
        self.tol = tol
        self._blocks = []
        for block in decomposition.blocks:
            size = block.size
            e = np.full(size, 1.0 / np.sqrt(size))
            deflated = [(e, 1.0)]
            if block.kind is BlockKind.BIPARTITE:
                f = np.concatenate([np.ones(block.half), -np.ones(block.half)]) / np.sqrt(size)
                deflated.append((f, -1.0))
            projector = np.eye(size)
            for vector, _ in deflated:
                projector -= np.outer(vector, vector)
            spectrum = scipy.linalg.eigvalsh(block.matrix)
            interior = spectrum[np.abs(np.abs(spectrum) - 1.0) > 1e-8]
            self._blocks.append((block.matrix, deflated, projector, interior))

    def restricted_inverse(self, z: SpectralPoint, number: int) -> np.ndarray:
        """ B = (1 - m^2 S_b)^-1 Q_b for block ``number``, in block coordinates. """
        matrix, deflated, projector, interior = self._blocks[number]
        msq = m_sc(z.z) ** 2
        if interior.size and np.abs(1.0 - msq * interior).min() < self.tol:
            raise NumericalBreakdown('1 - m^2 lambda is singular on the complement at {0}'.format(z))
        operator = np.eye(matrix.shape[0]) - msq * matrix
        for vector, eigenvalue in deflated:
            operator += msq * eigenvalue * np.outer(vector, vector)
        try:
            return scipy.linalg.solve(operator, projector)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as err:
            raise NumericalBreakdown(err) from err

    def gamma_hat(self, z: SpectralPoint) -> float:
        """ Max over blocks of the l^inf -> l^inf norm (max absolute row sum) of B. """
        return max(float(np.abs(self.restricted_inverse(z, number)).sum(axis=1).max())
                   for number in range(len(self._blocks)))

    def projector_norm(self) -> float:
        """ Max over blocks of the l^inf -> l^inf norm of the projector Q. """
        return max(float(np.abs(projector).sum(axis=1).max())
                   for _, _, projector, _ in self._blocks)


def gamma_hat(z: SpectralPoint, profile: VarianceProfile,
              decomposition: BlockDecomposition) -> float:
    """
    Stability norm Gamma^(z) of (1 - m(z)^2 S)^-1 restricted to span{e, f}^perp
    (span{e}^perp for primitive blocks), maximized over the blocks.

    Args:
        z: The spectral point.
        profile: The variance profile.
        decomposition: Its block decomposition.
    Returns:
        The l^inf -> l^inf norm of B = (1 - m^2 S)^-1 Q.
    Raises:
        NumericalBreakdown
    """
    return StabilityOperator(profile, decomposition).gamma_hat(z)
