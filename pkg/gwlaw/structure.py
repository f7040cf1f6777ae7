""" Holds the irreducible block decomposition of a variance profile.

A symmetric doubly stochastic S splits, after a permutation P of the indices,
into irreducible blocks

    S = P D(S_1, ..., S_p, S~_1, ..., S~_q) P^-1

where every S_a = [[0, A_a^T], [A_a, 0]] is bipartite (both +1 and -1 are
simple eigenvalues) and every S~_b is primitive. For symmetric S the period of
an irreducible block is at most 2, so a proper 2-colouring of the support graph
of a component is all that is needed to find the bipartite blocks.

Example usage::

    decomposition = decompose(profile)
    report = certify_block_spectra(decomposition, rho=0.9, tol=1e-10)
    print(decomposition.p, decomposition.q, report.passed)

"""

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from gwlaw.errors import StructureError
from gwlaw.kinds import BlockKind
from gwlaw.profile import BipartiteFactor, VarianceProfile, certified_gap, DEFAULT_TOL

logger = logging.getLogger(__name__)

SPECTRAL_TOL = 1e-8


@dataclass
class Block:
    """ One irreducible block in decomposed order.

    Attributes:
        kind: Bipartite or primitive.
        start: First decomposed index of the block.
        stop: One past the last decomposed index.
        matrix: The block S_a (bipartite) or S~_b (primitive).
        factor: The factor A_a for bipartite blocks, None otherwise.
    """
    kind: BlockKind
    start: int
    stop: int
    matrix: np.ndarray
    factor: Optional[BipartiteFactor] = None

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def half(self) -> int:
        """ d_a for bipartite blocks, the block size for primitive ones. """
        return self.size // 2 if self.kind is BlockKind.BIPARTITE else self.size


@dataclass
class BlockDecomposition:
    """ Permutation plus irreducible blocks of a variance profile.

    Attributes:
        permutation: Array mapping decomposed index -> original index (the P).
        blocks: Bipartite blocks first, then primitive blocks, each group ordered
            by the smallest original index of the block.
        m_bound: The bound M of the decomposed profile.
        inconsistencies: Components whose graph colouring and spectrum disagree.
    """
    permutation: np.ndarray
    blocks: List[Block]
    m_bound: float
    inconsistencies: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.permutation.size)

    @property
    def bipartite_blocks(self) -> List[BipartiteFactor]:
        return [block.factor for block in self.blocks if block.kind is BlockKind.BIPARTITE]

    @property
    def primitive_blocks(self) -> List[np.ndarray]:
        return [block.matrix for block in self.blocks if block.kind is BlockKind.PRIMITIVE]

    @property
    def p(self) -> int:
        return len(self.bipartite_blocks)

    @property
    def q(self) -> int:
        return len(self.primitive_blocks)

    @property
    def ranges(self) -> List[Tuple[int, int]]:
        return [(block.start, block.stop) for block in self.blocks]

    def original_indices(self, number: int) -> np.ndarray:
        """ Original labels of the indices of block ``number``, in block order. """
        block = self.blocks[number]
        return self.permutation[block.start:block.stop]

    def block_matrices(self) -> List[np.ndarray]:
        return [block.matrix for block in self.blocks]

    def reconstruct(self) -> np.ndarray:
        """ Returns P D(blocks) P^-1 in the original index order. """
        diagonal = scipy.linalg.block_diag(*self.block_matrices())
        matrix = np.empty_like(diagonal)
        matrix[np.ix_(self.permutation, self.permutation)] = diagonal
        return matrix

    def e_vector(self, number: int) -> np.ndarray:
        """ Normalized +1 eigenvector of block ``number``, embedded in original order. """
        vector = np.zeros(self.dim)
        indices = self.original_indices(number)
        vector[indices] = 1.0 / np.sqrt(indices.size)
        return vector

    def f_vector(self, number: int) -> np.ndarray:
        """
        Normalized -1 eigenvector of a bipartite block, embedded in original order:
        +1 on the first colour class, -1 on the second, scaled by 1/sqrt(2d).

        Raises:
            ValueError: for primitive blocks, which have no -1 eigenvalue.
        """
        block = self.blocks[number]
        if block.kind is not BlockKind.BIPARTITE:
            raise ValueError('Block {0} is primitive, f is undefined'.format(number))
        indices = self.original_indices(number)
        vector = np.zeros(self.dim)
        vector[indices[:block.half]] = 1.0
        vector[indices[block.half:]] = -1.0
        return vector / np.sqrt(indices.size)

    def to_dict(self) -> dict:
        return {
            'dim': self.dim,
            'p': self.p,
            'q': self.q,
            'm_bound': self.m_bound,
            'blocks': [{'kind': block.kind.value,
                        'size': block.size,
                        'indices': self.original_indices(i).tolist()}
                       for i, block in enumerate(self.blocks)],
            'inconsistencies': self.inconsistencies
        }

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4, sort_keys=True, default=str)


def _two_colouring(adjacency: scipy.sparse.csr_matrix) -> Optional[np.ndarray]:
    """ Breadth-first parity colouring of a connected graph; None if it is not proper. """
    order, predecessors = scipy.sparse.csgraph.breadth_first_order(
        adjacency, 0, directed=False, return_predecessors=True)
    colour = np.zeros(adjacency.shape[0], dtype=int)
    for node in order[1:]:
        colour[node] = 1 - colour[predecessors[node]]
    rows, cols = adjacency.nonzero()
    if np.any(colour[rows] == colour[cols]):
        return None
    return colour


def decompose(profile: VarianceProfile, zero_tol: float = 0.0) -> BlockDecomposition:
    """
    Decomposes a profile into its irreducible components and classifies each one.

    Indices i, j are connected if s_ij > zero_tol. A component with a proper
    2-colouring is bipartite and yields the factor A with rows indexed by colour 1
    and columns by colour 0, colour 0 holding the smallest original index.

    Args:
        profile: A profile satisfying (A1)-(A2).
        zero_tol: Entries <= zero_tol count as zero.
    Returns:
        The BlockDecomposition; colouring/spectrum disagreements are listed in
        its ``inconsistencies``.
    Raises:
        StructureError: if a singleton component has s_ii != 1, a colour class split
            is unbalanced or the factor is not doubly stochastic.
    """
    entries = profile.entries
    support = scipy.sparse.csr_matrix(entries > zero_tol)
    _, labels = scipy.sparse.csgraph.connected_components(support, directed=False)
    tol = max(profile.tol, zero_tol * profile.dim)

    bipartite, primitive, inconsistencies = [], [], []
    _, firsts = np.unique(labels, return_index=True)
    for label in labels[np.sort(firsts)]:
        indices = np.flatnonzero(labels == label)
        if indices.size == 1:
            if abs(entries[indices[0], indices[0]] - 1.0) > tol:
                raise StructureError('Singleton component {0} has s_ii = {1!r}, not 1'.format(
                    int(indices[0]), float(entries[indices[0], indices[0]])))
            primitive.append(indices)
            continue
        colour = _two_colouring(support[indices][:, indices])
        spectrum = scipy.linalg.eigvalsh(entries[np.ix_(indices, indices)])
        minus_one = bool(np.any(np.abs(spectrum + 1.0) <= SPECTRAL_TOL))
        if (colour is not None) != minus_one:
            inconsistencies.append(
                'component containing index {0}: {1} colouring but -1 {2} in spectrum'.format(
                    int(indices[0]), 'proper' if colour is not None else 'no',
                    'present' if minus_one else 'absent'))
        if colour is None:
            primitive.append(indices)
        else:
            classes = (indices[colour == 0], indices[colour == 1])
            if classes[0].size != classes[1].size:
                raise StructureError('Bipartite component containing index {0} has unequal '
                                     'colour classes {1} and {2}'.format(
                                         int(indices[0]), classes[0].size,
                                         classes[1].size))
            bipartite.append(classes)

    permutation, blocks, start = [], [], 0
    for left, right in bipartite:
        order = np.concatenate([left, right])
        try:
            factor = BipartiteFactor(entries[np.ix_(right, left)], m_bound=profile.m_bound,
                                     tol=tol)
        except ValueError as err:
            raise StructureError('Block containing index {0}: {1}'.format(
                int(left[0]), err)) from err
        zeros = np.zeros_like(factor.entries)
        matrix = np.block([[zeros, factor.entries.T], [factor.entries, zeros]])
        blocks.append(Block(BlockKind.BIPARTITE, start, start + order.size, matrix, factor))
        permutation.append(order)
        start += order.size
    for indices in primitive:
        matrix = entries[np.ix_(indices, indices)]
        if zero_tol > 0:
            matrix = np.where(matrix > zero_tol, matrix, 0.0)
        blocks.append(Block(BlockKind.PRIMITIVE, start, start + indices.size, matrix))
        permutation.append(indices)
        start += indices.size

    decomposition = BlockDecomposition(np.concatenate(permutation), blocks,
                                       profile.m_bound, inconsistencies)
    logger.debug('Decomposed profile of dim %d into p=%d bipartite and q=%d primitive blocks',
                 profile.dim, decomposition.p, decomposition.q)
    return decomposition


@dataclass
class BlockCertificate:
    """ Spectral certificate of one block. """
    # pylint: disable=too-many-instance-attributes
    number: int
    kind: BlockKind
    size: int
    half: int
    plus_one_multiplicity: int
    minus_one_multiplicity: int
    rho_measured: Optional[float]
    interior_ok: bool
    size_ok: bool

    @property
    def simple_ok(self) -> bool:
        if self.kind is BlockKind.BIPARTITE:
            return self.plus_one_multiplicity == 1 and self.minus_one_multiplicity == 1
        return self.plus_one_multiplicity == 1 and self.minus_one_multiplicity == 0

    @property
    def passed(self) -> bool:
        return self.simple_ok and self.interior_ok and self.size_ok


@dataclass
class CertReport:
    """ Spectral certificates of all blocks of a decomposition. """
    rho: Optional[float]
    tol: float
    m_bound: float
    blocks: List[BlockCertificate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(block.passed for block in self.blocks)

    @property
    def rho_measured(self) -> Optional[float]:
        measured = [block.rho_measured for block in self.blocks
                    if block.rho_measured is not None]
        return max(measured) if measured else None

    def to_dict(self) -> dict:
        return {
            'rho': self.rho,
            'rho_measured': self.rho_measured,
            'tol': self.tol,
            'm_bound': self.m_bound,
            'passed': self.passed,
            'blocks': [{'number': block.number,
                        'kind': block.kind.value,
                        'size': block.size,
                        'plus_one_multiplicity': block.plus_one_multiplicity,
                        'minus_one_multiplicity': block.minus_one_multiplicity,
                        'rho_measured': block.rho_measured,
                        'simple_ok': block.simple_ok,
                        'interior_ok': block.interior_ok,
                        'size_ok': block.size_ok,
                        'passed': block.passed} for block in self.blocks]
        }

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4, sort_keys=True, default=str)


def certify_block_spectra(decomposition: BlockDecomposition, rho: float = None,
                          tol: float = DEFAULT_TOL) -> CertReport:
    """
    Certifies the spectrum of every block: +1 simple (and -1 simple for bipartite
    blocks), the rest of the spectrum inside [-rho, rho], and d_a, d~_b >= M.
    Violations are reported, never raised.

    Args:
        decomposition: The decomposition to certify.
        rho: The gap parameter to certify against; None only measures it.
        tol: Tolerance on eigenvalue membership.
    Returns:
        The CertReport.
    """
    report = CertReport(rho=rho, tol=tol, m_bound=decomposition.m_bound)
    for number, block in enumerate(decomposition.blocks):
        spectrum = scipy.linalg.eigvalsh(block.matrix)
        measured = certified_gap(spectrum, tol)
        interior_ok = measured is None or rho is None or measured <= rho + tol
        report.blocks.append(BlockCertificate(
            number=number,
            kind=block.kind,
            size=block.size,
            half=block.half,
            plus_one_multiplicity=int(np.sum(np.abs(spectrum - 1.0) <= tol)),
            minus_one_multiplicity=int(np.sum(np.abs(spectrum + 1.0) <= tol)),
            rho_measured=measured,
            interior_ok=bool(interior_ok),
            size_ok=bool(block.half >= decomposition.m_bound * (1.0 - tol))))
    return report
