""" Holds variance profiles and the checks of the model assumptions.

A variance profile is the matrix S of entry variances s_ij = E|h_ij|^2 of a
generalized Wigner matrix. The module builds the profiles the experiments run on
(flat, periodic band and bipartite profiles built from a factor matrix A) and
checks the assumptions

  (A1) 0 <= s_ij <= 1/M with N^delta <= M <= N,
  (A2) every row of S sums to one,
  (A3) Spec(S) lies in {-1} U [-rho, rho] U {+1},

in :func:`validate_assumptions`.

Example usage::

    factor = BipartiteFactor.circulant_band(64, bandwidth=8)
    profile = build_bipartite_profile(factor)
    report = validate_assumptions(profile, delta=0.1, tol=1e-10)
    print(report)

"""

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
import scipy.linalg

from gwlaw.errors import NumericalBreakdown

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_DELTA = 0.1


def _as_square(entries) -> np.ndarray:
    matrix = np.array(entries, dtype=float, ndmin=2)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError('Expected a square matrix, got shape {0}'.format(matrix.shape))
    if not np.all(np.isfinite(matrix)):
        raise ValueError('Matrix has non-finite entries!')
    if np.any(matrix < 0):
        raise ValueError('Variances have to be nonnegative!')
    return matrix


def certified_gap(eigenvalues: np.ndarray, tol: float = DEFAULT_TOL) -> Optional[float]:
    """
    Measures rho as the largest |lambda| over the eigenvalues with |lambda| < 1 - tol.

    Returns:
        The certified rho, or None if every eigenvalue is +1 or -1 (empty interior).
    """
    interior = np.abs(eigenvalues)[np.abs(eigenvalues) < 1.0 - tol]
    if interior.size == 0:
        return None
    return float(interior.max())


class BipartiteFactor:
    """ The factor A of a bipartite block S = [[0, A^T], [A, 0]].

    Attributes:
        entries: The d x d nonnegative matrix A, rows and columns summing to one.
        dim: The half-size d of the block.
        m_bound: The bound M with a_ij <= 1/M; defaults to 1/max(a_ij).
    Raises:
        ValueError
    """

    def __init__(self, entries, m_bound: float = None, tol: float = DEFAULT_TOL):
        self.tol = tol
        self.entries = entries
        self.m_bound = m_bound

    @property
    def entries(self):
        return self._entries

    @property
    def m_bound(self):
        return self._m_bound

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @entries.setter
    def entries(self, entries):
        matrix = _as_square(entries)
        rows = np.abs(matrix.sum(axis=1) - 1.0)
        cols = np.abs(matrix.sum(axis=0) - 1.0)
        if rows.max() > self.tol:
            raise ValueError('Row {0} of the factor sums to {1!r}, not 1'.format(
                int(rows.argmax()), float(matrix.sum(axis=1)[rows.argmax()])))
        if cols.max() > self.tol:
            raise ValueError('Column {0} of the factor sums to {1!r}, not 1'.format(
                int(cols.argmax()), float(matrix.sum(axis=0)[cols.argmax()])))
        self._entries = matrix

    @m_bound.setter
    def m_bound(self, m_bound: float):
        implied = 1.0 / self._entries.max()
        if m_bound is None:
            m_bound = implied
        if m_bound <= 0:
            raise ValueError('M has to be positive!')
        if self._entries.max() > (1.0 + self.tol) / m_bound:
            raise ValueError('Entries exceed 1/M = {0!r}'.format(1.0 / m_bound))
        self._m_bound = float(m_bound)

    @classmethod
    def flat(cls, dim: int):
        """ Builds the flat factor A = J/d with all entries 1/d. """
        if dim < 1:
            raise ValueError('Dimension has to be positive!')
        return cls(np.full((dim, dim), 1.0 / dim))

    @classmethod
    def circulant_band(cls, dim: int, bandwidth: int):
        """
        Builds a non-symmetric circulant band factor with a_ij = 1/(2W+1) for
        (j - i) mod d in {0, ..., 2W}. Falls back to the flat factor if 2W+1 >= d.

        Args:
            dim: The half-size d.
            bandwidth: The band parameter W, 1 <= W <= d.
        Returns:
            A doubly stochastic BipartiteFactor.
        Raises:
            ValueError
        """
        if not 1 <= bandwidth <= dim:
            raise ValueError('Bandwidth {0} out of range [1, {1}]'.format(bandwidth, dim))
        width = 2 * bandwidth + 1
        if width >= dim:
            return cls.flat(dim)
        row = np.zeros(dim)
        row[:width] = 1.0 / width
        return cls(scipy.linalg.toeplitz(np.roll(row[::-1], 1), row))

    def __repr__(self):
        return 'BipartiteFactor(dim={0}, m_bound={1!r})'.format(self.dim, self.m_bound)


class VarianceProfile:
    """ Symmetric variance matrix S of a generalized Wigner matrix.

    The constructor only checks that S is a finite, square, nonnegative matrix;
    the model assumptions are checked by :func:`validate_assumptions` so that
    broken profiles can still be loaded and diagnosed.

    Attributes:
        entries: The dense matrix (s_ij).
        dim: The matrix size N.
        m_bound: The bound M; defaults to 1/max(s_ij).
        gap: The spectral gap parameter rho; defaults to the value certified from
            the spectrum, None if the spectrum has no interior part.
        eigenvalues: The ascending spectrum, computed lazily and cached while
            the profile is consistent.
    """
    # pylint: disable=missing-function-docstring

    def __init__(self, entries, m_bound: float = None, gap: float = None,
                 tol: float = DEFAULT_TOL):
        self.tol = tol
        self.is_consistent = False
        self._eigenvalues = None
        self.entries = entries
        self.m_bound = m_bound
        self.gap = gap

    @property
    def entries(self):
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def m_bound(self):
        return self._m_bound

    @property
    def gap(self):
        if self._gap is None:
            return certified_gap(self.eigenvalues, self.tol)
        return self._gap

    @property
    def declared_gap(self) -> Optional[float]:
        """ The rho given at construction or in the file header, None if only measured. """
        return self._gap

    @property
    def eigenvalues(self) -> np.ndarray:
        if self._eigenvalues is None or not self.is_consistent:
            try:
                self._eigenvalues = scipy.linalg.eigvalsh(self._entries)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as err:
                raise NumericalBreakdown(err) from err
            self.is_consistent = True
        return self._eigenvalues

    @entries.setter
    def entries(self, entries):
        self.is_consistent = False
        self._entries = _as_square(entries)

    @m_bound.setter
    def m_bound(self, m_bound: float):
        if m_bound is None:
            peak = self._entries.max()
            m_bound = 1.0 / peak if peak > 0 else float(self.dim)
        if m_bound <= 0:
            raise ValueError('M has to be positive!')
        self._m_bound = float(m_bound)

    @gap.setter
    def gap(self, gap: float):
        if gap is not None and not 0 <= gap < 1:
            raise ValueError('Gap parameter rho has to lie in [0, 1), got {0!r}'.format(gap))
        self._gap = gap

    @classmethod
    def flat(cls, dim: int):
        """ Builds the flat profile s_ij = 1/N. """
        if dim < 1:
            raise ValueError('Dimension has to be positive!')
        return cls(np.full((dim, dim), 1.0 / dim))

    @classmethod
    def from_file(cls, path: str, tol: float = DEFAULT_TOL):
        """
        Reads a profile in the text format written by :func:`to_file`: a header line
        "dim M rho" followed by dim rows of dim whitespace-separated decimals.

        Raises:
            OSError
            ValueError
        """
        with open(path) as handle:
            header = handle.readline().split()
            if len(header) != 3:
                raise ValueError('Header of {0} has to read "dim M rho"'.format(path))
            dim, m_bound, rho = int(header[0]), float(header[1]), float(header[2])
            entries = np.loadtxt(handle, ndmin=2)
        if entries.shape != (dim, dim):
            raise ValueError('Header announces dim {0}, file holds shape {1}'.format(
                dim, entries.shape))
        return cls(entries, m_bound=m_bound, gap=None if math.isnan(rho) else rho, tol=tol)

    def to_file(self, path: str):
        """ Writes the profile with 17 significant digits so that reading it back is exact. """
        rho = self.gap
        header = '{0} {1:.17g} {2}'.format(
            self.dim, self.m_bound, 'nan' if rho is None else '{0:.17g}'.format(rho))
        np.savetxt(path, self._entries, fmt='%.17g', header=header, comments='')

    def __repr__(self):
        return 'VarianceProfile(dim={0}, m_bound={1!r})'.format(self.dim, self.m_bound)


def build_bipartite_profile(factor: BipartiteFactor) -> VarianceProfile:
    """
    Builds the 2d x 2d profile S = [[0, A^T], [A, 0]] of a bipartite factor.

    Args:
        factor: The doubly stochastic factor A.
    Returns:
        The profile; its spectrum is plus/minus the singular values of A, so both
        +1 and -1 are eigenvalues.
    Raises:
        ValueError
    """
    matrix = factor.entries
    tol = factor.tol
    if np.abs(matrix.sum(axis=1) - 1.0).max() > tol or \
            np.abs(matrix.sum(axis=0) - 1.0).max() > tol:
        raise ValueError('Factor is not doubly stochastic!')
    zeros = np.zeros_like(matrix)
    entries = np.block([[zeros, matrix.T], [matrix, zeros]])
    return VarianceProfile(entries, m_bound=factor.m_bound, tol=tol)


def build_band_profile(n: int, bandwidth: int) -> VarianceProfile:
    """
    Builds the periodic band profile s_ij = 1/(2W+1) for cyclic |i - j| <= W.
    If 2W+1 >= n the band covers every index and the flat profile 1/n is returned.

    Args:
        n: The matrix size.
        bandwidth: The band parameter W with 1 <= W <= n.
    Returns:
        A symmetric doubly stochastic VarianceProfile with M = 2W+1 (or n).
    Raises:
        ValueError
    """
    if not 1 <= bandwidth <= n:
        raise ValueError('Bandwidth {0} out of range [1, {1}]'.format(bandwidth, n))
    width = 2 * bandwidth + 1
    if width >= n:
        return VarianceProfile.flat(n)
    column = np.zeros(n)
    column[:bandwidth + 1] = 1.0 / width
    column[n - bandwidth:] = 1.0 / width
    return VarianceProfile(scipy.linalg.circulant(column))


def block_diagonal(*blocks) -> VarianceProfile:
    """ The block operator D(M_1, ..., M_k) applied to profiles or plain matrices. """
    matrices = [block.entries if isinstance(block, VarianceProfile) else np.asarray(block)
                for block in blocks]
    return VarianceProfile(scipy.linalg.block_diag(*matrices))


def permute_profile(profile: VarianceProfile, permutation) -> VarianceProfile:
    """
    Relabels the indices of a profile.

    Args:
        profile: The profile in decomposed order.
        permutation: Array mapping decomposed index -> original index.
    Returns:
        The profile S with S[p[a], p[b]] = profile[a, b].
    """
    permutation = np.asarray(permutation)
    if sorted(permutation.tolist()) != list(range(profile.dim)):
        raise ValueError('Not a permutation of 0..{0}'.format(profile.dim - 1))
    entries = np.empty_like(profile.entries)
    entries[np.ix_(permutation, permutation)] = profile.entries
    return VarianceProfile(entries, m_bound=profile.m_bound, tol=profile.tol)


@dataclass
class AssumptionReport:
    """ Pass/fail record of the model assumptions for one profile. """
    # pylint: disable=too-many-instance-attributes
    dim: int
    m_bound: float
    delta: float
    tol: float
    symmetric: bool = False
    a1_entries: bool = False
    a1_scaling: bool = False
    a2: bool = False
    a2_bad_rows: List[int] = field(default_factory=list)
    a2_max_deviation: float = float('nan')
    a3: bool = False
    plus_one_multiplicity: int = 0
    minus_one_multiplicity: int = 0
    rho: Optional[float] = None
    rho_declared: Optional[float] = None
    error: Optional[str] = None

    @property
    def a1(self) -> bool:
        return self.a1_entries and self.a1_scaling

    @property
    def minus_one_present(self) -> bool:
        return self.minus_one_multiplicity > 0

    @property
    def passed(self) -> bool:
        return self.error is None and self.symmetric and self.a1 and self.a2 and self.a3

    def to_dict(self) -> dict:
        report = asdict(self)
        report.update(a1=self.a1, minus_one_present=self.minus_one_present,
                      passed=self.passed)
        return report

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4, sort_keys=True, default=str)


def validate_assumptions(profile: VarianceProfile, delta: float = DEFAULT_DELTA,
                         tol: float = DEFAULT_TOL, rho: float = None) -> AssumptionReport:
    """
    Checks (A1)-(A3) and symmetry for a profile. Never raises for a failed check;
    an eigensolver failure is recorded in the report's error field.

    Args:
        profile: The profile with dim >= 2.
        delta: The exponent in N^delta <= M <= N.
        tol: Tolerance for row sums and spectrum membership.
        rho: Gap parameter the interior spectrum has to stay within. Defaults to the
            profile's declared gap; without either, rho is only measured.
    Returns:
        The AssumptionReport.
    """
    if profile.dim < 2:
        raise ValueError('Profiles need dim >= 2')
    entries = profile.entries
    dim, m_bound = profile.dim, profile.m_bound
    rho = profile.declared_gap if rho is None else rho
    report = AssumptionReport(dim=dim, m_bound=m_bound, delta=delta, tol=tol, rho_declared=rho)
    report.symmetric = bool(np.abs(entries - entries.T).max() <= tol)
    report.a1_entries = bool(entries.max() <= (1.0 + tol) / m_bound)
    report.a1_scaling = bool(dim ** delta <= m_bound * (1.0 + tol) and m_bound <= dim * (1.0 + tol))

    deviation = np.abs(entries.sum(axis=1) - 1.0)
    report.a2_max_deviation = float(deviation.max())
    report.a2_bad_rows = [int(i) for i in np.flatnonzero(deviation > tol)]
    report.a2 = not report.a2_bad_rows

    try:
        eigenvalues = scipy.linalg.eigvalsh(0.5 * (entries + entries.T))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as err:
        report.error = 'eigensolver failed: {0}'.format(err)
        logger.warning('Eigensolver failed on profile of dim %d: %s', dim, err)
        return report
    report.plus_one_multiplicity = int(np.sum(np.abs(eigenvalues - 1.0) <= tol))
    report.minus_one_multiplicity = int(np.sum(np.abs(eigenvalues + 1.0) <= tol))
    report.rho = certified_gap(eigenvalues, tol)
    within_rho = rho is None or report.rho is None or report.rho <= rho + tol
    report.a3 = bool(report.plus_one_multiplicity > 0
                     and np.abs(eigenvalues).max() <= 1.0 + tol and within_rho)
    if not within_rho:
        logger.info('Interior spectrum reaches %.6g beyond rho = %.6g', report.rho, rho)
    logger.debug('Assumptions for dim %d: A1=%s A2=%s A3=%s rho=%s',
                 dim, report.a1, report.a2, report.a3, report.rho)
    return report
