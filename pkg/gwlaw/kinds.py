""" Holds the enumerations shared by configuration, sampling and verification. """
import enum


class Distribution(enum.Enum):
    """ Entry distributions of the sampled matrices. """
    REAL_GAUSSIAN = 'real-gaussian'
    COMPLEX_GAUSSIAN = 'complex-gaussian'
    SYMMETRIC_BERNOULLI = 'symmetric-bernoulli'


class SymmetryClass(enum.Enum):
    """ Symmetry class of the sampled matrices. """
    HERMITIAN = 'hermitian'
    REAL_SYMMETRIC = 'real-symmetric'


class ProfileKind(enum.Enum):
    """ Variance profile families the command line can build. """
    FLAT_BIPARTITE = 'flat-bipartite'
    BAND_BIPARTITE = 'band-bipartite'
    BAND_PRIMITIVE = 'band-primitive'
    FLAT_PRIMITIVE = 'flat-primitive'
    FILE = 'file'


class BlockKind(enum.Enum):
    """ Type of an irreducible block of a variance profile. """
    BIPARTITE = 'bipartite'
    PRIMITIVE = 'primitive'


class Suite(enum.Enum):
    """ Verification suites of the ``verify`` subcommand. """
    LOCAL_LAW = 'local-law'
    OUTSIDE = 'outside'
    RIGIDITY = 'rigidity'
    SCE = 'sce'
    FA = 'fa'
    MP_HARD_EDGE = 'mp-hard-edge'
    IDENTITIES = 'identities'
    GAMMA_HAT = 'gamma-hat'
    ALL = 'all'


class ExitCode(enum.IntEnum):
    """ Process exit codes of the command line. """
    PASS = 0
    FAILURE = 1
    INFRASTRUCTURE = 2
