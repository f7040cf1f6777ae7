""" Holds the random matrix ensembles consistent with a variance profile.

Every sample is a pure function of (master_seed, sample_index): the sample's
random stream is a counter-based Philox generator keyed by
``SeedSequence(master_seed, spawn_key=(sample_index,))``, and entry (i, j) always
consumes the variate at the same position of that stream. Samples can
therefore be drawn in any order, on any number of threads, bit for bit the same.

Example usage::

    config = EnsembleConfig(Distribution.REAL_GAUSSIAN, SymmetryClass.REAL_SYMMETRIC,
                            master_seed=2024, sample_count=50)
    sample = sample_bipartite(BipartiteFactor.flat(128), config, index=0)
    x_block = sample.x_block

"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.stats

from gwlaw.kinds import Distribution, SymmetryClass
from gwlaw.profile import BipartiteFactor, VarianceProfile, build_bipartite_profile
from gwlaw.theory import semicircle_cdf

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class EnsembleConfig:
    """ Distribution, symmetry class and seeding of an ensemble.

    Attributes:
        distribution: Entry distribution.
        symmetry_class: Hermitian or real symmetric.
        master_seed: The single 64-bit seed every sample derives from.
        sample_count: Number of samples in the ensemble.
    Raises:
        ValueError
    """
    distribution: Distribution = Distribution.REAL_GAUSSIAN
    symmetry_class: SymmetryClass = SymmetryClass.REAL_SYMMETRIC
    master_seed: int = 0
    sample_count: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError('sample_count has to be positive!')
        if not 0 <= self.master_seed < SEED_LIMIT:
            raise ValueError('master_seed has to be a 64-bit unsigned integer!')
        if self.distribution is Distribution.COMPLEX_GAUSSIAN and \
                self.symmetry_class is not SymmetryClass.HERMITIAN:
            raise ValueError('complex-gaussian entries need the hermitian class!')

    @property
    def is_complex(self) -> bool:
        return self.distribution is Distribution.COMPLEX_GAUSSIAN


@dataclass
class SampledMatrix:
    """ One Hermitian draw H from an ensemble.

    Attributes:
        entries: The dense Hermitian matrix.
        profile: The variance profile it was drawn from.
        sample_index: Index of the sample within the ensemble.
        seed_used: The 64-bit seed derived for this sample.
        config: The ensemble configuration.
        half: N for a bipartite 2N x 2N draw [[0, X*], [X, 0]], None otherwise.
    """
    entries: np.ndarray
    profile: VarianceProfile
    sample_index: int
    seed_used: int
    config: EnsembleConfig
    half: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def x_block(self) -> np.ndarray:
        """ The block X of H = [[0, X*], [X, 0]]. """
        if self.half is None:
            raise ValueError('Sample {0} has no bipartite block structure'.format(
                self.sample_index))
        return self.entries[self.half:, :self.half]

    def to_file(self, path: str):
        """ Dumps H in the dense text format of profiles, with the seeds in the header. """
        header = '{0} {1} {2} {3} {4}'.format(
            self.dim, self.seed_used, self.sample_index,
            self.config.distribution.value, self.config.symmetry_class.value)
        if np.iscomplexobj(self.entries):
            fmt = ' '.join(['%.17g%+.17gj'] * self.dim)
        else:
            fmt = '%.17g'
        np.savetxt(path, self.entries, fmt=fmt, header=header, comments='')


def sample_generator(master_seed: int, index: int):
    """
    The random stream of one sample.

    Returns:
        (numpy Generator over a Philox bit generator, the derived 64-bit seed)
    """
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    seed_used = int(sequence.generate_state(1, dtype=np.uint64)[0])
    return np.random.Generator(np.random.Philox(sequence)), seed_used


def _unit_variates(rng: np.random.Generator, shape, distribution: Distribution) -> np.ndarray:
    """ Centred variates with E|g|^2 = 1 in a fixed stream layout. """
    if distribution is Distribution.REAL_GAUSSIAN:
        return rng.standard_normal(shape)
    if distribution is Distribution.SYMMETRIC_BERNOULLI:
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return (real + 1j * imag) / np.sqrt(2.0)


def _check_index(config: EnsembleConfig, index: int):
    if not 0 <= index < config.sample_count:
        raise ValueError('Sample index {0} out of range [0, {1})'.format(
            index, config.sample_count))


def _bipartite_half(profile: VarianceProfile) -> Optional[int]:
    """ N if the profile is [[0, A^T], [A, 0]] with exactly zero diagonal blocks. """
    if profile.dim % 2:
        return None
    half = profile.dim // 2
    entries = profile.entries
    if np.any(entries[:half, :half]) or np.any(entries[half:, half:]):
        return None
    return half


def sample_hermitian(profile: VarianceProfile, config: EnsembleConfig,
                     index: int) -> SampledMatrix:
    """
    Draws a generalized Wigner matrix with E h_ij = 0 and E|h_ij|^2 = s_ij.

    The upper triangle including the diagonal is drawn independently, the lower
    triangle follows by conjugate symmetry, and the diagonal is real with
    variance s_ii. Entries with s_ij = 0 are exactly 0.

    Args:
        profile: The variance profile.
        config: The ensemble configuration.
        index: Sample index, 0 <= index < sample_count.
    Returns:
        The SampledMatrix.
    Raises:
        ValueError
    """
    _check_index(config, index)
    rng, seed_used = sample_generator(config.master_seed, index)
    dim = profile.dim
    variates = _unit_variates(rng, (dim, dim), config.distribution)
    scale = np.sqrt(profile.entries)
    diagonal = np.diag(variates).real
    if config.is_complex:
        diagonal = diagonal * np.sqrt(2.0)
    upper = np.triu(variates * scale, k=1)
    entries = upper + upper.conj().T + np.diag(diagonal * np.sqrt(np.diag(profile.entries)))
    logger.debug('Sampled hermitian matrix %d of dim %d (seed %d)', index, dim, seed_used)
    return SampledMatrix(entries, profile, index, seed_used, config, _bipartite_half(profile))


def sample_bipartite(factor: BipartiteFactor, config: EnsembleConfig,
                     index: int) -> SampledMatrix:
    """
    Draws the 2d x 2d linearization H = [[0, X*], [X, 0]] with independent entries
    x_ij, E x_ij = 0 and E|x_ij|^2 = a_ij. The diagonal blocks are exactly zero.

    Args:
        factor: The factor A.
        config: The ensemble configuration.
        index: Sample index, 0 <= index < sample_count.
    Returns:
        The SampledMatrix with ``half`` = d.
    Raises:
        ValueError
    """
    _check_index(config, index)
    rng, seed_used = sample_generator(config.master_seed, index)
    dim = factor.dim
    x_block = _unit_variates(rng, (dim, dim), config.distribution) * np.sqrt(factor.entries)
    zeros = np.zeros_like(x_block)
    entries = np.block([[zeros, x_block.conj().T], [x_block, zeros]])
    logger.debug('Sampled bipartite matrix %d of dim %d (seed %d)', index, 2 * dim, seed_used)
    return SampledMatrix(entries, build_bipartite_profile(factor), index, seed_used, config,
                         dim)


def broken_copy(sample: SampledMatrix, indices: Tuple[int, int] = None,
                magnitude: float = 0.5) -> SampledMatrix:
    """
    Negative control: a copy of a bipartite sample with a nonzero entry in a
    diagonal block, which breaks the balancing identity.

    Args:
        sample: The sample to break.
        indices: Two indices of the same colour class; defaults to the first two
            indices of the first half (or index 0 twice if the half has size 1).
        magnitude: Value added to H_ij and H_ji.
    Returns:
        A new SampledMatrix with the same metadata.
    """
    if indices is None:
        if sample.half is None:
            raise ValueError('Only bipartite samples have diagonal blocks to break')
        indices = (0, 1) if sample.half >= 2 else (0, 0)
    first, second = indices
    entries = np.array(sample.entries, copy=True)
    entries[first, second] += magnitude
    if first != second:
        entries[second, first] += magnitude
    return replace(sample, entries=entries)


def _entry_class(samples: List[SampledMatrix], rows: np.ndarray, cols: np.ndarray):
    variances = samples[0].profile.entries[rows, cols]
    mask = variances > 0
    rows, cols, variances = rows[mask], cols[mask], variances[mask]
    values = np.stack([sample.entries[rows, cols] for sample in samples])
    return values, variances


def _ratios(values: np.ndarray, variances: np.ndarray) -> Tuple[float, float]:
    if not variances.size:
        return np.nan, np.nan
    second = np.abs(values) ** 2 / variances
    return float(second.mean()), float((second ** 2).mean())


def empirical_moments(samples: List[SampledMatrix]) -> pd.Series:
    """
    Empirical moment ratios, separately for the off-diagonal entries (i < j) and
    the diagonal, over the entries with s_ij > 0.

    The diagonal of a hermitian matrix is real, so its fourth ratio is the real
    one (3 for Gaussians) even in the complex class.

    Returns:
        Series with the off-diagonal means of |h|^2/s (ideally 1) and |h|^4/s^2
        (3 for real and 2 for complex Gaussians, 1 for Bernoulli), the same two
        ratios of the diagonal (NaN if s_ii = 0 throughout), the largest normalized
        mean |E h| sqrt(count/s) over all entries and the number of samples.
    """
    if not samples:
        raise ValueError('Need at least one sample')
    dim = samples[0].profile.dim
    off_values, off_variances = _entry_class(samples, *np.triu_indices(dim, k=1))
    diag_values, diag_variances = _entry_class(samples, np.arange(dim), np.arange(dim))
    second, fourth = _ratios(off_values, off_variances)
    diagonal_second, diagonal_fourth = _ratios(diag_values, diag_variances)
    values = np.concatenate([off_values, diag_values], axis=1)
    variances = np.concatenate([off_variances, diag_variances])
    return pd.Series({
        'second_ratio': second,
        'fourth_ratio': fourth,
        'diagonal_second_ratio': diagonal_second,
        'diagonal_fourth_ratio': diagonal_fourth,
        'max_normalized_mean': float(np.max(np.abs(values.mean(axis=0))
                                            * np.sqrt(len(samples) / variances))),
        'samples': len(samples)
    })


def semicircle_ks_distance(eigenvalues) -> float:
    """ Kolmogorov-Smirnov distance of an empirical spectrum to the semicircle law. """
    return float(scipy.stats.kstest(np.asarray(eigenvalues), semicircle_cdf).statistic)
