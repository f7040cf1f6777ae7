""" Monte Carlo verification suites for the local laws of generalized Wigner matrices.

Every suite sweeps cells (sample x spectral point), records the observed errors
next to the bounds of the laws and summarizes how often the errors exceed
dim^eps times the bound. The asymptotic relation X < Y ("stochastically
dominated") is tested operationally: at a fixed eps the exceedance fraction over
a seeded ensemble has to stay below a threshold (eps = 0.2, 5%), and the
empirical exponent max log(X/Y) / log(dim) must not grow across doubled dims.

Cells are computed independently on a bounded thread pool and merged in
(sample_index, z-index) order, so reports are deterministic given the seed.

Example usage::

    profile = build_bipartite_profile(BipartiteFactor.flat(128))
    config = EnsembleConfig(master_seed=7, sample_count=20)
    params = DomainParams(gamma=0.3, m_bound=profile.m_bound)
    points = z_grid(energy_grid(-2.2, 2.2, 11), eta_grid(params, 4))
    report = check_local_law(profile, config, points, epsilons=[0.1, 0.2, 0.3])
    report.to_csv('local-law.csv')
    print(report.to_json(), report.passed())

"""

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from gwlaw.ensemble import EnsembleConfig, SampledMatrix, broken_copy, sample_bipartite, \
    sample_hermitian
from gwlaw.errors import NumericalBreakdown
from gwlaw.kinds import BlockKind, Suite
from gwlaw.profile import BipartiteFactor, VarianceProfile, certified_gap
from gwlaw.resolvent import covariance_blocks, direct_covariance_inverse, eigen, \
    green_matrix, resolvent, resolvent_from_eigen
from gwlaw.structure import BlockDecomposition, decompose
from gwlaw.theory import DEFAULT_GAMMA, DomainParams, SpectralPoint, StabilityOperator, \
    energy_grid, eta_grid, in_domain, m_mp, m_sc, mp_domain_ok, outside_bound, pi_bound, \
    semicircle_quantiles, z_grid

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.1, 0.2, 0.3)
TEST_EPSILON = 0.2
EXCEEDANCE_LIMIT = 0.05
IDENTITY_TOL = 1e-10
ORACLE_TOL = 1e-8
HAZARD_TOL = 1e-12
EIGEN_CROSSOVER = 20
LINEARIZATION_SLACK = 3.0
LINEARIZATION_FRACTION = 0.95
AVERAGING_FRACTION = 0.9
RIGIDITY_FLAG_EXPONENT = 0.1
TREND_LIMIT = 0.05
LOGLOG_SLOPE_LIMIT = 1.1

CSV_COLUMNS = ['sample_index', 'E', 'eta', 'observed_entrywise', 'observed_averaged',
               'bound_entrywise', 'bound_averaged', 'ratio']


def _jsonable(value):
    """ Plain python values for json, with nan and inf mapped to None. """
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(summary: dict) -> str:
    """ Deterministic JSON text of a report summary. """
    return json.dumps(_jsonable(summary), indent=4, sort_keys=True, default=str)


def _map_samples(work: Callable[[int], list], count: int, threads: int) -> list:
    """ Runs ``work`` for every sample index and concatenates the rows in index order. """
    if threads <= 1:
        chunks = [work(index) for index in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, range(count)))
    return [row for chunk in chunks for row in chunk]


def _slices(sample: SampledMatrix, points: Sequence[SpectralPoint], keep_full: bool = None):
    """ Resolvent slices of one sample, or the NumericalBreakdown of each failed point. """
    if len(points) >= EIGEN_CROSSOVER:
        try:
            eig = eigen(sample, with_vectors=True)
        except NumericalBreakdown as err:
            return [err] * len(points)
        compute = lambda z: resolvent_from_eigen(eig, z, keep_full)
    else:
        compute = lambda z: resolvent(sample, z, keep_full)
    outcomes = []
    for z in points:
        try:
            outcomes.append(compute(z))
        except NumericalBreakdown as err:
            outcomes.append(err)
    return outcomes


def _failed_cells(cells: pd.DataFrame) -> List[dict]:
    failed = cells[cells['error'].notna()]
    return [{'sample_index': int(row.sample_index), 'E': row.E, 'eta': row.eta,
             'error': row.error} for row in failed.itertuples()]


class ReportFiles:
    """ File output shared by the reports; subclasses provide ``summary`` and ``plot_data``. """

    def summary(self) -> dict:
        raise NotImplementedError

    def plot_data(self) -> pd.DataFrame:
        raise NotImplementedError

    def to_json(self, path: str = None, provenance: dict = None) -> str:
        """ JSON summary, optionally with a provenance record, written to ``path`` if given. """
        summary = self.summary()
        if provenance is not None:
            summary['provenance'] = provenance
        text = dumps(summary)
        if path is not None:
            with open(path, 'w') as handle:
                handle.write(text + '\n')
        return text

    def write_plot_data(self, path: str):
        """ Writes the plot data as whitespace separated x, y columns. """
        self.plot_data().to_csv(path, sep=' ', index=False, float_format='%.17g')

    def __str__(self):
        return self.to_json()


@dataclass
class DominationSummary:
    """ Exceedance fractions of observed > dim^eps * bound and the empirical exponent.

    Attributes:
        epsilons: The tested exponents.
        exceedance: Fraction of exceeding entries, one per epsilon.
        exponent: max log(observed/bound) / log(dim), None if nothing was positive.
        count: Number of entries summarized.
    """
    epsilons: List[float]
    exceedance: List[float]
    exponent: Optional[float]
    count: int

    def exceedance_at(self, epsilon: float) -> float:
        for tested, fraction in zip(self.epsilons, self.exceedance):
            if math.isclose(tested, epsilon):
                return fraction
        raise KeyError('epsilon {0!r} was not tested'.format(epsilon))

    def to_dict(self) -> dict:
        return {
            'count': self.count,
            'exponent': self.exponent,
            'exceedance': {repr(float(eps)): frac
                           for eps, frac in zip(self.epsilons, self.exceedance)}
        }


def estimate_domination(observed, bound, dim: int, epsilons) -> DominationSummary:
    """
    Operational test of stochastic domination observed < bound.

    Args:
        observed: Nonnegative observed errors.
        bound: Positive bounds, same length as ``observed``.
        dim: The N whose powers N^eps give the slack.
        epsilons: Exponents to test.
    Returns:
        The DominationSummary.
    Raises:
        ValueError: on empty or mismatched arrays, nonpositive bounds or dim < 2.
    """
    observed = np.asarray(observed, dtype=float)
    bound = np.asarray(bound, dtype=float)
    if observed.shape != bound.shape or observed.size < 1:
        raise ValueError('observed and bound need the same nonzero length, got {0} and {1}'.format(
            observed.shape, bound.shape))
    if not np.all(bound > 0):
        raise ValueError('bounds have to be positive, smallest is {0!r}'.format(
            float(np.min(bound))))
    if not np.all(np.isfinite(observed)) or np.any(observed < 0):
        raise ValueError('observed values have to be finite and nonnegative')
    if dim < 2:
        raise ValueError('dim has to be at least 2, got {0}'.format(dim))
    epsilons = [float(eps) for eps in epsilons]
    exceedance = [float(np.mean(observed > dim ** eps * bound)) for eps in epsilons]
    ratios = observed / bound
    positive = ratios[ratios > 0]
    exponent = float(np.log(positive).max() / np.log(dim)) if positive.size else None
    return DominationSummary(epsilons, exceedance, exponent, int(observed.size))


@dataclass
class LocalLawReport(ReportFiles):
    """ Cells of a local law sweep with their domination statistics.

    Attributes:
        suite: Name of the suite that produced the report.
        dim: The N of the dim^eps slack.
        m_bound: The M of the bounds.
        epsilons: The tested exponents.
        cells: One row per (sample, z) with the ``CSV_COLUMNS`` plus
            ``ratio_entrywise``, ``ratio_averaged`` and ``error``.
        checked: The error kinds ('entrywise', 'averaged') that decide passing.
        extra: Suite specific maxima, e.g. the inverse oracle residual.
    """
    suite: str
    dim: int
    m_bound: float
    epsilons: List[float]
    cells: pd.DataFrame
    checked: tuple = ('entrywise', 'averaged')
    extra: Dict[str, float] = field(default_factory=dict)

    def _valid(self, kind: str) -> pd.DataFrame:
        return self.cells[self.cells['observed_' + kind].notna()]

    def domination(self, kind: str, epsilons=None) -> Optional[DominationSummary]:
        """ DominationSummary of the 'entrywise' or 'averaged' errors. """
        valid = self._valid(kind)
        if valid.empty:
            return None
        return estimate_domination(valid['observed_' + kind], valid['bound_' + kind],
                                   self.dim, self.epsilons if epsilons is None else epsilons)

    @property
    def failed_cells(self) -> List[dict]:
        return _failed_cells(self.cells)

    def passed(self, epsilon: float = TEST_EPSILON, limit: float = EXCEEDANCE_LIMIT) -> bool:
        """ True iff no cell failed and every checked exceedance at epsilon is <= limit. """
        if self.failed_cells:
            return False
        for kind in self.checked:
            summary = self.domination(kind, [epsilon])
            if summary is None or summary.exceedance[0] > limit:
                return False
        return all(value <= ORACLE_TOL for key, value in self.extra.items()
                   if key.endswith('oracle_residual'))

    def per_z(self) -> pd.DataFrame:
        grouped = self.cells.groupby(['E', 'eta'], sort=False)
        return grouped.agg(worst_ratio_entrywise=('ratio_entrywise', 'max'),
                           worst_ratio_averaged=('ratio_averaged', 'max'),
                           mean_entrywise=('observed_entrywise', 'mean'),
                           mean_averaged=('observed_averaged', 'mean')).reset_index()

    def summary(self) -> dict:
        entrywise = self.domination('entrywise')
        averaged = self.domination('averaged')
        return {
            'suite': self.suite,
            'dim': self.dim,
            'm_bound': self.m_bound,
            'cells': len(self.cells),
            'checked': list(self.checked),
            'entrywise': entrywise.to_dict() if entrywise else None,
            'averaged': averaged.to_dict() if averaged else None,
            'worst_ratio_entrywise': self.cells['ratio_entrywise'].max(),
            'worst_ratio_averaged': self.cells['ratio_averaged'].max(),
            'per_z': self.per_z().to_dict(orient='records'),
            'failed_cells': self.failed_cells,
            'extra': self.extra,
            'passed': self.passed()
        }

    def to_csv(self, path: str):
        self.cells[CSV_COLUMNS].to_csv(path, index=False, float_format='%.17g')

    def plot_data(self) -> pd.DataFrame:
        """ Mean observed errors against eta: columns eta, entrywise, averaged. """
        grouped = self.cells.groupby('eta')
        return pd.DataFrame({'entrywise': grouped['observed_entrywise'].mean(),
                             'averaged': grouped['observed_averaged'].mean()}).reset_index()


def _law_frame(rows: List[dict], primary: str) -> pd.DataFrame:
    cells = pd.DataFrame(rows, columns=CSV_COLUMNS[:-1] + ['error'])
    cells['ratio_entrywise'] = cells['observed_entrywise'] / cells['bound_entrywise']
    cells['ratio_averaged'] = cells['observed_averaged'] / cells['bound_averaged']
    cells['ratio'] = cells['ratio_' + primary]
    return cells


def _law_rows(sample: SampledMatrix, points: Sequence[SpectralPoint], bounds: list,
              keep_full: bool) -> List[dict]:
    rows = []
    for z, (entrywise, averaged), outcome in zip(points, bounds,
                                                  _slices(sample, points, keep_full)):
        row = {'sample_index': sample.sample_index, 'E': z.E, 'eta': z.eta,
               'bound_entrywise': entrywise, 'bound_averaged': averaged,
               'observed_entrywise': np.nan, 'observed_averaged': np.nan, 'error': None}
        if isinstance(outcome, NumericalBreakdown):
            row['error'] = str(outcome)
        else:
            m = m_sc(z.z)
            row['observed_entrywise'] = outcome.entrywise_error(m)
            row['observed_averaged'] = outcome.averaged_error(m)
        rows.append(row)
    return rows


def _check_domain(points: Sequence[SpectralPoint], params: DomainParams):
    outside = [z for z in points if not in_domain(z, params)]
    if not points:
        raise ValueError('The z-grid is empty')
    if outside:
        raise ValueError('{0} points lie outside D({1}) (|z| <= 10, eta >= {2!r}), '
                         'first {3}'.format(len(outside), params.gamma, params.eta_min,
                                            outside[0]))


def check_local_law(profile: VarianceProfile, config: EnsembleConfig,
                    z_grid: Sequence[SpectralPoint], epsilons=DEFAULT_EPSILONS,
                    gamma: float = DEFAULT_GAMMA, threads: int = 1,
                    keep_full: bool = None) -> LocalLawReport:
    """
    Entrywise and averaged local law sweep inside the spectral domain.

    For every sample and z the errors max_ij |G_ij - m delta_ij| and
    |(1/dim) Tr G - m| are compared with the bounds of ``pi_bound``.

    Args:
        profile: A valid variance profile.
        config: The ensemble configuration.
        z_grid: Points of D(gamma).
        epsilons: Exponents of the exceedance statistics.
        gamma: The domain exponent.
        threads: Size of the worker pool.
        keep_full: Forwarded to the resolvent computation.
    Returns:
        The LocalLawReport.
    Raises:
        ValueError: if a point lies outside D(gamma).
    """
    points = list(z_grid)
    M = profile.m_bound
    _check_domain(points, DomainParams(gamma, M))
    bounds = [pi_bound(z, M) for z in points]
    logger.info('Local law sweep: dim %d, %d samples, %d points', profile.dim,
                config.sample_count, len(points))

    def work(index):
        return _law_rows(sample_hermitian(profile, config, index), points, bounds, keep_full)

    cells = _law_frame(_map_samples(work, config.sample_count, threads), 'entrywise')
    return LocalLawReport(Suite.LOCAL_LAW.value, profile.dim, M, list(epsilons), cells)


def check_outside_law(profile: VarianceProfile, config: EnsembleConfig,
                      z_list: Sequence[SpectralPoint], epsilons=DEFAULT_EPSILONS,
                      gamma: float = DEFAULT_GAMMA, threads: int = 1) -> LocalLawReport:
    """
    Averaged local law outside the spectrum against ``outside_bound``.

    Raises:
        ValueError: if a point has |E| < 2 or eta sqrt(kappa + eta) < M^(-1+gamma).
    """
    points = list(z_list)
    if not points:
        raise ValueError('The z-list is empty')
    M = profile.m_bound
    bounds = [(pi_bound(z, M)[0], outside_bound(z, M, gamma)) for z in points]
    logger.info('Outside law sweep: dim %d, %d samples, %d points', profile.dim,
                config.sample_count, len(points))

    def work(index):
        return _law_rows(sample_hermitian(profile, config, index), points, bounds, None)

    cells = _law_frame(_map_samples(work, config.sample_count, threads), 'averaged')
    return LocalLawReport(Suite.OUTSIDE.value, profile.dim, M, list(epsilons), cells,
                          checked=('averaged',))


def check_mp_hard_edge(factor: BipartiteFactor, config: EnsembleConfig,
                       w_grid: Sequence[complex], epsilons=DEFAULT_EPSILONS,
                       gamma: float = DEFAULT_GAMMA, threads: int = 1) -> LocalLawReport:
    """
    Local Marchenko-Pastur law of X*X at the hard edge.

    (X*X - w)^-1 is read off the block G_11(z) / z, z = sqrt(w), and compared
    entrywise with m_mp(w) delta_ij against sqrt(Im m_mp / (M Im w)) + 1/(M Im w)
    and in trace against 1/(M Im w). A direct inverse of X*X - w serves as
    oracle; its largest relative deviation is reported as ``oracle_residual``.

    Args:
        factor: The factor A of the variances of X.
        config: The ensemble configuration.
        w_grid: Points with Im w > 0, |w| <= 100 and Im w >= sqrt(|Re w|) M^(-1+gamma).
        epsilons: Exponents of the exceedance statistics.
        gamma: The domain exponent.
        threads: Size of the worker pool.
    Returns:
        The LocalLawReport; E and eta hold Re w and Im w.
    Raises:
        ValueError: if a point violates the domain constraints.
    """
    points = [complex(w) for w in w_grid]
    if not points:
        raise ValueError('The w-grid is empty')
    M = factor.m_bound
    rejected = [w for w in points if not (w.imag > 0 and mp_domain_ok(w, M, gamma))]
    if rejected:
        raise ValueError('{0} points violate |w| <= 100, Im w >= sqrt(|Re w|) M^(-1+gamma), '
                         'first {1}'.format(len(rejected), rejected[0]))
    stieltjes = [m_mp(w) for w in points]
    logger.info('Hard edge sweep: d %d, %d samples, %d points', factor.dim,
                config.sample_count, len(points))

    def work(index):
        sample = sample_bipartite(factor, config, index)
        rows = []
        for w, m in zip(points, stieltjes):
            scale = M * w.imag
            row = {'sample_index': index, 'E': w.real, 'eta': w.imag,
                   'bound_entrywise': float(np.sqrt(m.imag / scale) + 1.0 / scale),
                   'bound_averaged': 1.0 / scale, 'observed_entrywise': np.nan,
                   'observed_averaged': np.nan, 'oracle_residual': np.nan, 'error': None}
            try:
                z = SpectralPoint.from_complex(np.sqrt(w))
                upper, _ = covariance_blocks(sample, z, verify=False)
                inverse = upper / z.z
                direct = direct_covariance_inverse(sample, w)
            except NumericalBreakdown as err:
                row['error'] = str(err)
                rows.append(row)
                continue
            row['observed_entrywise'] = float(np.abs(inverse - m * np.eye(factor.dim)).max())
            row['observed_averaged'] = float(abs(np.trace(inverse) / factor.dim - m))
            row['oracle_residual'] = float(np.abs(inverse - direct).max()
                                           / max(1.0, np.abs(direct).max()))
            rows.append(row)
        return rows

    rows = _map_samples(work, config.sample_count, threads)
    cells = _law_frame(rows, 'entrywise')
    cells['oracle_residual'] = [row['oracle_residual'] for row in rows]
    residual = cells['oracle_residual'].max()
    return LocalLawReport(Suite.MP_HARD_EDGE.value, factor.dim, M, list(epsilons), cells,
                          extra={'oracle_residual': residual if np.isfinite(residual) else 0.0})


@dataclass
class RigidityReport(ReportFiles):
    """ Eigenvalue deviations from the semicircle quantiles in the bulk.

    Attributes:
        dim: Total dimension N.
        m_bound: The M of the bound (1/M)(N/alpha^)^(1/3).
        epsilon: Bulk exponent, alpha^ >= N M^(-1+epsilon).
        bulk: First and last bulk index alpha (1-based).
        cells: One row per (sample, bulk alpha).
        flag_exponent: Deviations above dim^flag_exponent * bound are flagged.
        failures: Samples whose eigensolver broke down.
        median_offset: Largest |median eigenvalue| over the samples.
    """
    # pylint: disable=too-many-instance-attributes
    dim: int
    m_bound: float
    epsilon: float
    bulk: tuple
    cells: pd.DataFrame
    flag_exponent: float = RIGIDITY_FLAG_EXPONENT
    failures: List[dict] = field(default_factory=list)
    median_offset: float = 0.0

    @property
    def flagged_fraction(self) -> float:
        return float(self.cells['flagged'].mean()) if len(self.cells) else 0.0

    def passed(self, limit: float = EXCEEDANCE_LIMIT) -> bool:
        return not self.failures and len(self.cells) > 0 and self.flagged_fraction <= limit

    def summary(self) -> dict:
        return {
            'suite': Suite.RIGIDITY.value,
            'dim': self.dim,
            'm_bound': self.m_bound,
            'epsilon': self.epsilon,
            'bulk': list(self.bulk),
            'flag_exponent': self.flag_exponent,
            'flagged_fraction': self.flagged_fraction,
            'worst_ratio': self.cells['ratio'].max() if len(self.cells) else None,
            'median_offset': self.median_offset,
            'failures': self.failures,
            'passed': self.passed()
        }

    def to_csv(self, path: str):
        self.cells.to_csv(path, index=False, float_format='%.17g')

    def plot_data(self) -> pd.DataFrame:
        """ Mean deviation |lambda_alpha - gamma_alpha| against alpha. """
        return self.cells.groupby('alpha')['deviation'].mean().reset_index()


def check_rigidity(profile: VarianceProfile, config: EnsembleConfig, epsilon: float,
                   flag_exponent: float = RIGIDITY_FLAG_EXPONENT,
                   threads: int = 1) -> RigidityReport:
    """
    Compares the ordered eigenvalues with the semicircle quantiles.

    Args:
        profile: A valid variance profile.
        config: The ensemble configuration.
        epsilon: Bulk exponent, only alpha^ = min(alpha, N + 1 - alpha) >= N M^(-1+epsilon)
            is checked.
        flag_exponent: Deviations above dim^flag_exponent times the bound are flagged.
        threads: Size of the worker pool.
    Returns:
        The RigidityReport.
    Raises:
        ValueError: if epsilon <= 0.
    """
    if not epsilon > 0:
        raise ValueError('epsilon has to be positive, got {0!r}'.format(epsilon))
    dim, M = profile.dim, profile.m_bound
    alpha = np.arange(1, dim + 1)
    alpha_hat = np.minimum(alpha, dim + 1 - alpha)
    bulk = alpha_hat >= dim * M ** (-1.0 + epsilon)
    if not np.any(bulk):
        warnings.warn('The bulk alpha^ >= {0!r} is empty at dim {1}'.format(
            dim * M ** (-1.0 + epsilon), dim))
    quantiles = semicircle_quantiles(dim)
    bound = (dim / alpha_hat) ** (1.0 / 3.0) / M
    slack = dim ** flag_exponent
    logger.info('Rigidity sweep: dim %d, %d samples, %d bulk indices', dim,
                config.sample_count, int(bulk.sum()))

    def work(index):
        sample = sample_hermitian(profile, config, index)
        try:
            eigenvalues = eigen(sample).eigenvalues
        except NumericalBreakdown as err:
            return [{'sample_index': index, 'error': str(err)}]
        deviation = np.abs(eigenvalues - quantiles)
        return [{'sample_index': index, 'alpha': int(a), 'alpha_hat': int(ah),
                 'eigenvalue': float(lam), 'quantile': float(q), 'deviation': float(dev),
                 'bound': float(b), 'ratio': float(dev / b), 'flagged': bool(dev > slack * b),
                 'median': float(np.median(eigenvalues))}
                for a, ah, lam, q, dev, b in zip(alpha[bulk], alpha_hat[bulk], eigenvalues[bulk],
                                                 quantiles[bulk], deviation[bulk], bound[bulk])]

    rows = _map_samples(work, config.sample_count, threads)
    failures = [row for row in rows if 'error' in row]
    columns = ['sample_index', 'alpha', 'alpha_hat', 'eigenvalue', 'quantile', 'deviation',
               'bound', 'ratio', 'flagged']
    good = [row for row in rows if 'error' not in row]
    cells = pd.DataFrame(good, columns=columns + ['median'])
    median_offset = float(cells['median'].abs().max()) if good else 0.0
    bulk_range = (int(alpha[bulk][0]), int(alpha[bulk][-1])) if np.any(bulk) else ()
    return RigidityReport(dim, M, epsilon, bulk_range, cells[columns], flag_exponent,
                          failures, median_offset)


SCE_COLUMNS = ['sample_index', 'E', 'eta', 'upsilon_inf', 'v_inf', 'psi_proxy', 'diag_norm',
               'f_v', 'f_w', 'linear_residual', 'w_inf', 'linear_w_residual', 'gamma_hat',
               'error']


@dataclass
class SCEReport(ReportFiles):
    """ Residuals of the self-consistent equation for v = diag G - m.

    The control parameters of the local law are replaced by observable proxies:
    ||v||_inf for Lambda and ||Upsilon||_inf + ||v||_inf^2 for Psi^2. The
    identities (f, v) = (f, w) = 0 are reported relative to ||diag G||_2, which
    the table carries as ``diag_norm``, and maximized over the bipartite blocks;
    they are NaN without bipartite blocks.

    Attributes:
        suite: 'sce' or 'fa'.
        dim: Dimension of the profile.
        cells: One row per (sample, z) with the ``SCE_COLUMNS``.
        tol: Tolerance of the exact identities.
    """
    suite: str
    dim: int
    cells: pd.DataFrame
    tol: float = IDENTITY_TOL

    @property
    def failed_cells(self) -> List[dict]:
        return _failed_cells(self.cells)

    @property
    def linearization_fraction(self) -> float:
        """ Fraction of cells with ||(1 - m^2 S) v||_inf <= 3 (||Upsilon||_inf + ||v||_inf^2). """
        valid = self.cells[self.cells['error'].isna()]
        if valid.empty:
            return 0.0
        return float(np.mean(valid['linear_residual']
                             <= LINEARIZATION_SLACK * valid['psi_proxy']))

    @property
    def averaging_fraction(self) -> float:
        """ Fraction of cells with ||w||_inf <= dim^0.2 Gamma^ (||Upsilon||_inf + ||v||_inf^2). """
        valid = self.cells[self.cells['error'].isna() & self.cells['gamma_hat'].notna()]
        if valid.empty:
            return 0.0
        bound = self.dim ** TEST_EPSILON * valid['gamma_hat'] * valid['psi_proxy']
        return float(np.mean(valid['w_inf'] <= bound))

    def identity_max(self, column: str) -> Optional[float]:
        value = self.cells[column].max()
        return float(value) if np.isfinite(value) else None

    def passed(self) -> bool:
        if self.failed_cells:
            return False
        if self.suite == Suite.FA.value:
            identity, fraction = self.identity_max('f_w'), self.averaging_fraction
            return (identity is None or identity <= self.tol) and fraction >= AVERAGING_FRACTION
        identity, fraction = self.identity_max('f_v'), self.linearization_fraction
        return (identity is None or identity <= self.tol) and fraction >= LINEARIZATION_FRACTION

    def summary(self) -> dict:
        return {
            'suite': self.suite,
            'dim': self.dim,
            'cells': len(self.cells),
            'tol': self.tol,
            'max_f_v': self.identity_max('f_v'),
            'max_f_w': self.identity_max('f_w'),
            'max_upsilon_inf': self.cells['upsilon_inf'].max(),
            'max_v_inf': self.cells['v_inf'].max(),
            'max_w_inf': self.cells['w_inf'].max(),
            'max_gamma_hat': self.cells['gamma_hat'].max(),
            'linearization_fraction': self.linearization_fraction,
            'averaging_fraction': self.averaging_fraction,
            'proxies': {'lambda': 'v_inf', 'psi_squared': 'upsilon_inf + v_inf^2'},
            'identity_scale': 'diag_norm',
            'failed_cells': self.failed_cells,
            'passed': self.passed()
        }

    def to_csv(self, path: str):
        self.cells[SCE_COLUMNS[:-1]].to_csv(path, index=False, float_format='%.17g')

    def plot_data(self) -> pd.DataFrame:
        """ Mean ||v||_inf and ||w||_inf against eta. """
        grouped = self.cells.groupby('eta')
        return pd.DataFrame({'v_inf': grouped['v_inf'].mean(),
                             'w_inf': grouped['w_inf'].mean()}).reset_index()


def _f_vectors(decomposition: BlockDecomposition) -> List[np.ndarray]:
    return [decomposition.f_vector(number) for number, block in enumerate(decomposition.blocks)
            if block.kind is BlockKind.BIPARTITE]


def _projection(vectors: List[np.ndarray], values: np.ndarray, scale: float) -> float:
    if not vectors:
        return np.nan
    return max(float(abs(np.dot(f, values))) for f in vectors) / scale


def _stability(profile: VarianceProfile, decomposition: BlockDecomposition,
               points: Sequence[SpectralPoint]) -> List[float]:
    stability = StabilityOperator(profile, decomposition)
    values = []
    for z in points:
        try:
            values.append(stability.gamma_hat(z))
        except NumericalBreakdown as err:
            logger.warning('Gamma^ undefined at %s: %s', z, err)
            values.append(np.nan)
    return values


def _sce_check(suite: Suite, profile: VarianceProfile, decomposition: BlockDecomposition,
               config: EnsembleConfig, z_grid: Sequence[SpectralPoint], gamma: float,
               threads: int) -> SCEReport:
    points = list(z_grid)
    _check_domain(points, DomainParams(gamma, profile.m_bound))
    if decomposition.dim != profile.dim:
        raise ValueError('Decomposition of dim {0} does not match profile of dim {1}'.format(
            decomposition.dim, profile.dim))
    f_vectors = _f_vectors(decomposition)
    if not f_vectors:
        warnings.warn('Profile has no bipartite block, the f-identities are not defined')
    stability = _stability(profile, decomposition, points)
    entries = profile.entries
    linear = [np.eye(profile.dim) - m_sc(z.z) ** 2 * entries for z in points]
    logger.info('%s sweep: dim %d, %d samples, %d points', suite.value, profile.dim,
                config.sample_count, len(points))

    def work(index):
        sample = sample_hermitian(profile, config, index)
        rows = []
        for number, (z, outcome) in enumerate(zip(points, _slices(sample, points, False))):
            row = dict.fromkeys(SCE_COLUMNS, np.nan)
            row.update(sample_index=index, E=z.E, eta=z.eta, gamma_hat=stability[number],
                       error=None)
            if isinstance(outcome, NumericalBreakdown):
                row['error'] = str(outcome)
                rows.append(row)
                continue
            diag = outcome.diag
            if np.abs(diag).min() < HAZARD_TOL:
                row['error'] = 'division hazard: |m + v_i| = {0!r} at {1}'.format(
                    float(np.abs(diag).min()), z)
                rows.append(row)
                continue
            m = m_sc(z.z)
            v = diag - m
            upsilon = 1.0 / diag - 1.0 / m + entries @ v
            w = entries @ (v - v.mean())
            scale = float(np.linalg.norm(diag))
            row.update(upsilon_inf=float(np.abs(upsilon).max()), v_inf=float(np.abs(v).max()),
                       diag_norm=scale, f_v=_projection(f_vectors, v, scale),
                       f_w=_projection(f_vectors, w, scale),
                       linear_residual=float(np.abs(linear[number] @ v).max()),
                       w_inf=float(np.abs(w).max()),
                       linear_w_residual=float(np.abs(linear[number] @ w).max()))
            row['psi_proxy'] = row['upsilon_inf'] + row['v_inf'] ** 2
            rows.append(row)
        return rows

    cells = pd.DataFrame(_map_samples(work, config.sample_count, threads), columns=SCE_COLUMNS)
    return SCEReport(suite.value, profile.dim, cells)


def check_sce(profile: VarianceProfile, decomposition: BlockDecomposition,
              config: EnsembleConfig, z_grid: Sequence[SpectralPoint],
              gamma: float = DEFAULT_GAMMA, threads: int = 1) -> SCEReport:
    """
    Residuals of -sum_k s_ik v_k + Upsilon_i = 1/(m + v_i) - 1/m.

    Upsilon is solved from the equation for every cell, and the linearization
    residual ||(1 - m^2 S) v||_inf is set against ||Upsilon||_inf + ||v||_inf^2.
    Cells with |m + v_i| < 1e-12 are recorded as division hazards.

    Args:
        profile: A valid variance profile, f is defined on its bipartite blocks.
        decomposition: Its block decomposition.
        config: The ensemble configuration.
        z_grid: Points of D(gamma).
        gamma: The domain exponent.
        threads: Size of the worker pool.
    Returns:
        The SCEReport.
    Raises:
        ValueError
    """
    return _sce_check(Suite.SCE, profile, decomposition, config, z_grid, gamma, threads)


def check_fluctuation_averaging(profile: VarianceProfile, decomposition: BlockDecomposition,
                                config: EnsembleConfig, z_grid: Sequence[SpectralPoint],
                                gamma: float = DEFAULT_GAMMA, threads: int = 1) -> SCEReport:
    """
    Fluctuation averaging of w = S (v - [v] 1) with [v] the average of v.

    (f, w) vanishes identically since S f = -f, and ||w||_inf is set against
    Gamma^(z) (||Upsilon||_inf + ||v||_inf^2).

    Returns:
        The SCEReport with suite 'fa'.
    Raises:
        ValueError
    """
    return _sce_check(Suite.FA, profile, decomposition, config, z_grid, gamma, threads)


IDENTITY_COLUMNS = ['sample_index', 'E', 'eta', 'balancing', 'diag_norm', 'f_diag', 'f_v', 'f_w',
                    'ward', 'herglotz', 'control_balancing', 'control_diag_norm',
                    'control_f_diag', 'error']
IDENTITY_RESIDUALS = ['balancing', 'f_diag', 'f_v', 'f_w', 'ward']


@dataclass
class IdentityReport(ReportFiles):
    """ Exact identities of the resolvent, with a negative control per cell.

    Residuals are relative: balancing to sum_k |G_kk| over the block, the
    f-projections to ||diag G||_2 (the ``diag_norm`` column), the Ward identity
    sum_j |G_ij|^2 = Im G_ii / eta to max_i Im G_ii / eta. The control columns
    repeat balancing and (f, diag G) on a copy with a nonzero diagonal block,
    scaled by that copy's ``control_diag_norm``; they have to exceed the tolerance.

    Attributes:
        dim: Dimension of the profile.
        cells: One row per (sample, z) with the ``IDENTITY_COLUMNS``.
        tol: Tolerance of the identities.
        negative_control: Whether the main input itself was broken.
    """
    dim: int
    cells: pd.DataFrame
    tol: float = IDENTITY_TOL
    negative_control: bool = False

    @property
    def failed_cells(self) -> List[dict]:
        return _failed_cells(self.cells)

    def residual_maxima(self) -> Dict[str, Optional[float]]:
        maxima = {}
        for column in IDENTITY_RESIDUALS:
            value = self.cells[column].max()
            maxima[column] = float(value) if np.isfinite(value) else None
        return maxima

    @property
    def control_detected(self) -> Optional[float]:
        """ Fraction of cells whose broken copy violates the identities, None without f. """
        control = self.cells[['control_balancing', 'control_f_diag']].max(axis=1)
        control = control[control.notna()]
        if control.empty:
            return None
        return float(np.mean(control > self.tol))

    def passed(self) -> bool:
        if self.failed_cells or len(self.cells) == 0:
            return False
        if any(value is not None and value > self.tol for value in self.residual_maxima().values()):
            return False
        if not (self.cells['herglotz'] > 0).all():
            return False
        detected = self.control_detected
        return detected is None or detected == 1.0

    def summary(self) -> dict:
        return {
            'suite': Suite.IDENTITIES.value,
            'dim': self.dim,
            'cells': len(self.cells),
            'tol': self.tol,
            'negative_control': self.negative_control,
            'residual_maxima': self.residual_maxima(),
            'identity_scale': 'diag_norm',
            'min_herglotz': self.cells['herglotz'].min(),
            'control_detected': self.control_detected,
            'failed_cells': self.failed_cells,
            'passed': self.passed()
        }

    def to_csv(self, path: str):
        self.cells[IDENTITY_COLUMNS[:-1]].to_csv(path, index=False, float_format='%.17g')

    def plot_data(self) -> pd.DataFrame:
        """ Largest identity residual against eta. """
        frame = self.cells.assign(residual=self.cells[IDENTITY_RESIDUALS].max(axis=1))
        return frame.groupby('eta')['residual'].max().reset_index()


def _balancing(decomposition: BlockDecomposition, diag: np.ndarray) -> float:
    defects = []
    for number, block in enumerate(decomposition.blocks):
        if block.kind is not BlockKind.BIPARTITE:
            continue
        indices = decomposition.original_indices(number)
        left, right = indices[:block.half], indices[block.half:]
        defects.append(abs(diag[left].sum() - diag[right].sum()) / np.abs(diag[indices]).sum())
    return float(max(defects)) if defects else np.nan


def _control_indices(decomposition: BlockDecomposition) -> Optional[tuple]:
    for number, block in enumerate(decomposition.blocks):
        if block.kind is BlockKind.BIPARTITE:
            left = decomposition.original_indices(number)[:block.half]
            return (int(left[0]), int(left[1])) if left.size >= 2 else (int(left[0]),) * 2
    return None


def check_identities(profile: VarianceProfile, decomposition: BlockDecomposition,
                     config: EnsembleConfig, z_grid: Sequence[SpectralPoint],
                     negative_control: bool = False, tol: float = IDENTITY_TOL,
                     threads: int = 1) -> IdentityReport:
    """
    Checks the identities that hold for every sample, not only statistically:
    balancing of the block traces, (f, diag G) = (f, v) = (f, w) = 0, the Ward
    identity and Im G_ii > 0. Profiles without bipartite blocks only get the
    Ward and Herglotz checks.

    Args:
        profile: A valid variance profile.
        decomposition: Its block decomposition.
        config: The ensemble configuration.
        z_grid: Spectral points, eta > 0.
        negative_control: Break the main input too; the suite then has to fail.
        tol: Tolerance of the identities.
        threads: Size of the worker pool.
    Returns:
        The IdentityReport.
    Raises:
        ValueError
    """
    points = list(z_grid)
    if not points:
        raise ValueError('The z-grid is empty')
    f_vectors = _f_vectors(decomposition)
    control = _control_indices(decomposition)
    if control is None:
        warnings.warn('Profile has no bipartite block, only e-identities are checked')
        if negative_control:
            raise ValueError('A negative control needs a bipartite block')
    entries = profile.entries
    logger.info('Identity sweep: dim %d, %d samples, %d points', profile.dim,
                config.sample_count, len(points))

    def work(index):
        sample = sample_hermitian(profile, config, index)
        broken = broken_copy(sample, control) if control is not None else None
        if negative_control:
            sample = broken
        rows = []
        for z in points:
            row = dict.fromkeys(IDENTITY_COLUMNS, np.nan)
            row.update(sample_index=index, E=z.E, eta=z.eta, error=None)
            try:
                green = green_matrix(sample, z)
                if broken is not None:
                    broken_diag = np.diag(green_matrix(broken, z, check=False))
                    row['control_diag_norm'] = float(np.linalg.norm(broken_diag))
                    row['control_balancing'] = _balancing(decomposition, broken_diag)
                    row['control_f_diag'] = _projection(f_vectors, broken_diag,
                                                        row['control_diag_norm'])
            except NumericalBreakdown as err:
                row['error'] = str(err)
                rows.append(row)
                continue
            diag = np.diag(green)
            scale = float(np.linalg.norm(diag))
            v = diag - m_sc(z.z)
            ward = (np.abs(green) ** 2).sum(axis=1) - diag.imag / z.eta
            row.update(balancing=_balancing(decomposition, diag), diag_norm=scale,
                       f_diag=_projection(f_vectors, diag, scale),
                       f_v=_projection(f_vectors, v, scale),
                       f_w=_projection(f_vectors, entries @ (v - v.mean()), scale),
                       ward=float(np.abs(ward).max() / (diag.imag / z.eta).max()),
                       herglotz=float(diag.imag.min()))
            rows.append(row)
        return rows

    cells = pd.DataFrame(_map_samples(work, config.sample_count, threads),
                         columns=IDENTITY_COLUMNS)
    return IdentityReport(profile.dim, cells, tol, negative_control)


@dataclass
class GammaHatReport(ReportFiles):
    """ Growth of max_z Gamma^(z) across dims.

    Attributes:
        table: One row per profile: dim, rho_measured, max_gamma_hat, its E and
            eta, log_dim, ratio max_gamma_hat / log(dim), undefined points.
        constant: The fitted c = max ratio in Gamma^ <= c log(dim).
        slope: Least squares slope of log(max Gamma^) against log(log(dim)); c log(dim)
            has slope 1, a power dim^a has slope a log(dim).
    """
    table: pd.DataFrame
    constant: float
    slope: Optional[float]

    @classmethod
    def from_table(cls, table: pd.DataFrame):
        """ Fits constant and slope to a table with at least dim and max_gamma_hat columns. """
        table = table.sort_values('dim').reset_index(drop=True)
        log_dim = np.log(table['dim'].astype(float))
        table['log_dim'] = log_dim
        table['ratio'] = table['max_gamma_hat'] / log_dim
        slope = None
        if len(table) >= 2 and np.all(np.isfinite(table['max_gamma_hat'])):
            slope = float(np.polyfit(np.log(log_dim), np.log(table['max_gamma_hat']), 1)[0])
        return cls(table, float(table['ratio'].max()), slope)

    def passed(self, slope_limit: float = LOGLOG_SLOPE_LIMIT) -> bool:
        """ Rejects super-logarithmic growth: the log-log slope has to stay below the limit. """
        if not np.all(np.isfinite(self.table['max_gamma_hat'])):
            return False
        return self.slope is None or self.slope <= slope_limit

    def summary(self) -> dict:
        return {
            'suite': Suite.GAMMA_HAT.value,
            'constant': self.constant,
            'slope': self.slope,
            'slope_limit': LOGLOG_SLOPE_LIMIT,
            'dims': self.table.to_dict(orient='records'),
            'passed': self.passed()
        }

    def to_csv(self, path: str):
        self.table.to_csv(path, index=False, float_format='%.17g')

    def plot_data(self) -> pd.DataFrame:
        return self.table[['dim', 'max_gamma_hat']]


def gamma_hat_grid(m_bound: float, gamma: float = DEFAULT_GAMMA, energies: int = 20,
                   etas: int = 10) -> List[SpectralPoint]:
    """
    Default sweep for Gamma^: a linear E-grid over [-2.2, 2.2] plus E = 0 and
    E = +-1e-3, crossed with a geometric eta-grid from M^(-1+gamma) to 1.
    """
    params = DomainParams(gamma, m_bound)
    values = np.union1d(energy_grid(-2.2, 2.2, energies), [-1e-3, 0.0, 1e-3])
    return [z for z in z_grid(values, eta_grid(params, etas)) if in_domain(z, params)]


def check_gamma_hat_growth(profiles: Sequence[VarianceProfile],
                           z_grid: Sequence[SpectralPoint] = None,
                           gamma: float = DEFAULT_GAMMA) -> GammaHatReport:
    """
    Sweeps Gamma^ over a z-grid for profiles of growing dimension.

    Args:
        profiles: Profiles of increasing dim.
        z_grid: Common points; by default ``gamma_hat_grid`` of each profile.
        gamma: Domain exponent of the default grids.
    Returns:
        The GammaHatReport.
    Raises:
        ValueError: if no profile is given.
    """
    if not profiles:
        raise ValueError('Need at least one profile')
    rows = []
    for profile in profiles:
        decomposition = decompose(profile)
        points = list(z_grid) if z_grid is not None else gamma_hat_grid(profile.m_bound, gamma)
        values = np.array(_stability(profile, decomposition, points))
        finite = np.isfinite(values)
        best = int(np.nanargmax(values)) if finite.any() else 0
        maximum = float(values[best]) if finite.any() else np.nan
        rows.append({'dim': profile.dim,
                     'rho_measured': certified_gap(profile.eigenvalues, profile.tol),
                     'max_gamma_hat': maximum, 'E': points[best].E, 'eta': points[best].eta,
                     'undefined_points': int((~finite).sum())})
        logger.info('Gamma^ at dim %d: max %.4g over %d points', profile.dim, maximum, len(points))
    return GammaHatReport.from_table(pd.DataFrame(rows))


def exponent_trend(reports: Sequence[LocalLawReport], kind: str = 'entrywise',
                   limit: float = TREND_LIMIT) -> pd.DataFrame:
    """
    Empirical exponent of the local law across dims.

    Args:
        reports: Local law reports of the same suite at different dims.
        kind: 'entrywise' or 'averaged'.
        limit: Largest admissible growth of the exponent per doubling of dim.
    Returns:
        DataFrame sorted by dim with columns dim, exponent, change_per_doubling
        and flagged (growth above the limit).
    """
    rows = []
    for report in sorted(reports, key=lambda item: item.dim):
        summary = report.domination(kind)
        rows.append({'dim': report.dim,
                     'exponent': summary.exponent if summary and summary.exponent is not None
                     else np.nan})
    trend = pd.DataFrame(rows, columns=['dim', 'exponent'])
    doublings = np.log2(trend['dim'] / trend['dim'].shift(1))
    trend['change_per_doubling'] = trend['exponent'].diff() / doublings
    trend['flagged'] = trend['change_per_doubling'] > limit
    return trend
