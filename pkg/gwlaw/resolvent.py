""" Holds Green function computations for sampled matrices.

The resolvent G(z) = (H - z)^-1 is computed by a dense LU solve per spectral
point, or through the spectral theorem

    G_ij(z) = sum_a v_i^(a) conj(v_j^(a)) / (lambda_a - z)

once the eigendecomposition of H is known, which is cheaper when one sample is
evaluated at many points. For bipartite H = [[0, X*], [X, 0]] the diagonal
blocks of G are G_11 = z (X*X - z^2)^-1 and G_22 = z (XX* - z^2)^-1, and the
partial traces over both halves coincide exactly.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from gwlaw.ensemble import SampledMatrix
from gwlaw.errors import NumericalBreakdown
from gwlaw.theory import SpectralPoint

logger = logging.getLogger(__name__)

KEEP_FULL_LIMIT = 1024
RESIDUAL_TOL = 1e-8
SUBSET_FACTOR = 10

_LINALG_ERRORS = (np.linalg.LinAlgError, scipy.linalg.LinAlgError)


@dataclass
class ResolventSlice:
    """ diag(G(z)), the normalized trace and optionally the full G at one point.

    Attributes:
        z: The spectral point.
        diag: The diagonal (G_11, ..., G_nn).
        trace_normalized: (1/n) Tr G.
        full_matrix: The full G, if kept.
        offdiag_index: Rows and columns of the off-diagonal entries kept when
            the full matrix is dropped.
        offdiag_values: Those entries.
    """
    z: SpectralPoint
    diag: np.ndarray
    trace_normalized: complex
    full_matrix: Optional[np.ndarray] = None
    offdiag_index: Optional[Tuple[np.ndarray, np.ndarray]] = None
    offdiag_values: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.diag.size

    def entrywise_error(self, m: complex) -> float:
        """ max_ij |G_ij - m delta_ij| over the full matrix or the kept subset. """
        diagonal = float(np.abs(self.diag - m).max())
        if self.full_matrix is not None:
            offdiag = np.abs(self.full_matrix - np.diag(np.diag(self.full_matrix)))
            return max(diagonal, float(offdiag.max()))
        if self.offdiag_values is not None and self.offdiag_values.size:
            return max(diagonal, float(np.abs(self.offdiag_values).max()))
        return diagonal

    def averaged_error(self, m: complex) -> float:
        return float(abs(self.trace_normalized - m))


@dataclass
class EigenData:
    """ Ascending eigenvalues and optional orthonormal eigenvectors of H. """
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    def residual(self, sample: SampledMatrix) -> float:
        """ max_a ||H v_a - lambda_a v_a||_2 """
        if self.eigenvectors is None:
            raise ValueError('Eigenvectors were not retained')
        defect = sample.entries @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.linalg.norm(defect, axis=0).max())


def offdiag_subset(dim: int, count: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deterministic random subset of off-diagonal positions (i, j), i != j, of size
    min(10 dim, dim (dim - 1)); a pure function of dim.
    """
    total = dim * (dim - 1)
    count = min(SUBSET_FACTOR * dim if count is None else count, total)
    rng = np.random.default_rng(dim)
    flat = np.sort(rng.choice(total, size=count, replace=False))
    rows = flat // (dim - 1)
    cols = flat % (dim - 1)
    cols = cols + (cols >= rows)
    return rows, cols


def _slice(z: SpectralPoint, matrix: np.ndarray, keep_full: bool) -> ResolventSlice:
    diag = np.diag(matrix).copy()
    result = ResolventSlice(z, diag, complex(diag.mean()))
    if keep_full:
        result.full_matrix = matrix
    elif matrix.shape[0] > 1:
        rows, cols = offdiag_subset(matrix.shape[0])
        result.offdiag_index = (rows, cols)
        result.offdiag_values = matrix[rows, cols]
    return result


def _keep_full(dim: int, keep_full: Optional[bool]) -> bool:
    return dim <= KEEP_FULL_LIMIT if keep_full is None else keep_full


def green_matrix(sample: SampledMatrix, z: SpectralPoint, check: bool = True) -> np.ndarray:
    """
    Solves (H - z) G = I by LU factorization.

    Raises:
        NumericalBreakdown: if the factorization fails or the residual
            ||(H - z) G - I||_max exceeds 1e-8 (||H|| + |z|).
    """
    shifted = sample.entries - z.z * np.eye(sample.dim)
    identity = np.eye(sample.dim, dtype=complex)
    try:
        green = scipy.linalg.solve(shifted, identity, check_finite=False)
    except _LINALG_ERRORS as err:
        raise NumericalBreakdown('LU solve failed at {0}: {1}'.format(z, err)) from err
    if check:
        residual = np.abs(shifted @ green - identity).max()
        scale = np.abs(sample.entries).sum(axis=1).max() + abs(z.z)
        if residual > RESIDUAL_TOL * scale:
            raise NumericalBreakdown('Resolvent residual {0!r} at {1} exceeds {2!r}'.format(
                residual, z, RESIDUAL_TOL * scale))
    return green


def resolvent(sample: SampledMatrix, z: SpectralPoint, keep_full: bool = None) -> ResolventSlice:
    """
    Computes G(z) = (H - z)^-1 by a dense factorization.

    Args:
        sample: The matrix H.
        z: The spectral point, eta > 0.
        keep_full: Keep the full matrix; defaults to True up to dim 1024. Without
            it a deterministic subset of 10 dim off-diagonal entries is kept.
    Returns:
        The ResolventSlice.
    Raises:
        NumericalBreakdown
    """
    return _slice(z, green_matrix(sample, z), _keep_full(sample.dim, keep_full))


def eigen(sample: SampledMatrix, with_vectors: bool = False) -> EigenData:
    """
    Full ascending spectrum of H, optionally with orthonormal eigenvectors.

    Raises:
        NumericalBreakdown: if the eigensolver does not converge.
    """
    try:
        if with_vectors:
            values, vectors = scipy.linalg.eigh(sample.entries, check_finite=False)
            return EigenData(values, vectors)
        return EigenData(scipy.linalg.eigh(sample.entries, eigvals_only=True,
                                           check_finite=False))
    except _LINALG_ERRORS as err:
        raise NumericalBreakdown('Eigensolver failed on sample {0} of dim {1}: {2}'.format(
            sample.sample_index, sample.dim, err)) from err


def resolvent_from_eigen(eig: EigenData, z: SpectralPoint,
                         keep_full: bool = None) -> ResolventSlice:
    """
    Computes G(z) from eigendata through the spectral theorem.

    Raises:
        ValueError: if the eigenvectors were not retained.
    """
    if eig.eigenvectors is None:
        raise ValueError('Resolvents from eigendata need the eigenvectors')
    vectors = eig.eigenvectors
    weights = 1.0 / (eig.eigenvalues - z.z)
    dim = eig.eigenvalues.size
    if _keep_full(dim, keep_full):
        return _slice(z, (vectors * weights) @ vectors.conj().T, True)
    diag = (np.abs(vectors) ** 2) @ weights
    result = ResolventSlice(z, diag, complex(diag.mean()))
    if dim > 1:
        rows, cols = offdiag_subset(dim)
        result.offdiag_index = (rows, cols)
        result.offdiag_values = np.einsum('ka,ka,a->k', vectors[rows], vectors[cols].conj(),
                                          weights)
    return result


def _require_bipartite(sample: SampledMatrix) -> int:
    half = sample.half
    if half is None or np.any(sample.entries[:half, :half]) or \
            np.any(sample.entries[half:, half:]):
        raise ValueError('Sample {0} is not of the form [[0, X*], [X, 0]]'.format(
            sample.sample_index))
    return half


def covariance_blocks(sample: SampledMatrix, z: SpectralPoint,
                      verify: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    The diagonal blocks G_11(z), G_22(z) of the resolvent of H = [[0, X*], [X, 0]].

    Args:
        sample: A bipartite sample.
        z: The spectral point.
        verify: Check G_11 = z (X*X - z^2)^-1 by a direct inverse.
    Returns:
        (G_11, G_22)
    Raises:
        ValueError: if the sample is not bipartite.
        NumericalBreakdown: if the direct inverse disagrees beyond 1e-8.
    """
    half = _require_bipartite(sample)
    green = green_matrix(sample, z)
    upper, lower = green[:half, :half], green[half:, half:]
    if verify:
        direct = z.z * direct_covariance_inverse(sample, z.z ** 2)
        deviation = np.abs(upper - direct).max()
        if deviation > RESIDUAL_TOL * max(1.0, np.abs(upper).max()):
            raise NumericalBreakdown('G_11 deviates from z (X*X - z^2)^-1 by {0!r} at {1}'.format(
                deviation, z))
    return upper, lower


def direct_covariance_inverse(sample: SampledMatrix, w: complex) -> np.ndarray:
    """ (X*X - w)^-1 by a direct dense inverse. """
    x_block = sample.x_block
    gram = x_block.conj().T @ x_block
    try:
        return scipy.linalg.inv(gram - w * np.eye(gram.shape[0]))
    except _LINALG_ERRORS as err:
        raise NumericalBreakdown('Inverse of X*X - w failed at w = {0}: {1}'.format(w, err)) \
            from err


def check_balancing(sample: SampledMatrix, z: SpectralPoint) -> float:
    """
    Relative defect |sum_{k<=N} G_kk - sum_{k>N} G_kk| / sum_k |G_kk| of the
    balancing identity. It vanishes up to roundoff for every H with zero diagonal
    blocks, random or not.

    Raises:
        ValueError: if the sample carries no bipartite split.
    """
    if sample.half is None:
        raise ValueError('Balancing needs a bipartite sample')
    diag = np.diag(green_matrix(sample, z, check=False))
    return float(abs(diag[:sample.half].sum() - diag[sample.half:].sum())
                 / np.abs(diag).sum())


def resolvent_identity_residual(sample: SampledMatrix, first: SpectralPoint,
                                second: SpectralPoint) -> float:
    """ max_ij |G(z1) - G(z2) - (z1 - z2) G(z1) G(z2)|. """
    green_first = green_matrix(sample, first)
    green_second = green_matrix(sample, second)
    defect = green_first - green_second - (first.z - second.z) * green_first @ green_second
    return float(np.abs(defect).max())
