""" Holds the experiment configuration of the command line.

An experiment is described by an INI file with the sections ``[profile]``,
``[ensemble]``, ``[grid]``, ``[verify]`` and ``[output]``; every key is
optional. Values are resolved with the precedence

    command line flag > environment variable > config file > default

where ``GWLAW_SEED`` overrides the master seed and ``GWLAW_THREADS`` the size of
the worker pool. The resolved configuration is frozen, and the SHA-256 digest of
its canonical text is embedded in every report.

Example usage::

    config = load_config('smoke.ini', overrides={'master_seed': 7})
    profile = build_profile(config)
    points = spectral_grid(config, profile.m_bound)
    print(config.digest(), len(points))

Example file::

    [profile]
    kind = band-bipartite
    dim = 256
    bandwidth = 32

    [ensemble]
    distribution = real-gaussian
    master_seed = 2024
    samples = 20

    [grid]
    e_min = -2.2
    e_max = 2.2
    e_count = 11
    eta_count = 4

    [verify]
    epsilons = 0.1, 0.2, 0.3

    [output]
    directory = reports

"""

import configparser
import hashlib
import logging
import os
from dataclasses import dataclass, fields
from typing import List, Mapping, Optional, Tuple

import numpy as np

from gwlaw.ensemble import EnsembleConfig
from gwlaw.kinds import Distribution, ProfileKind, SymmetryClass
from gwlaw.profile import DEFAULT_DELTA, DEFAULT_TOL, BipartiteFactor, VarianceProfile, \
    build_band_profile, build_bipartite_profile
from gwlaw.structure import decompose
from gwlaw.theory import DEFAULT_GAMMA, DomainParams, SpectralPoint, energy_grid, eta_grid, \
    outside_domain_ok, z_grid
from gwlaw.verify import DEFAULT_EPSILONS

logger = logging.getLogger(__name__)

SEED_VARIABLE = 'GWLAW_SEED'
THREADS_VARIABLE = 'GWLAW_THREADS'

BIPARTITE_KINDS = (ProfileKind.FLAT_BIPARTITE, ProfileKind.BAND_BIPARTITE)
BAND_KINDS = (ProfileKind.BAND_BIPARTITE, ProfileKind.BAND_PRIMITIVE)
UNHASHED_FIELDS = ('threads', 'out_dir')


@dataclass(frozen=True)
class ExperimentConfig:
    """ Resolved configuration of one experiment.

    Attributes:
        profile_kind: Family of the variance profile.
        dim: Total dimension N of the profile (2d for bipartite kinds).
        bandwidth: Band parameter W of the band kinds.
        profile_path: Profile file of the 'file' kind.
        m_bound: Override of the bound M, None for 1/max(s_ij).
        rho: Gap parameter rho to certify against, None to only measure it.
        delta: Exponent in N^delta <= M <= N.
        tol: Tolerance of the assumption and spectral checks.
        dims: Further total dimensions of the Gamma^ growth and exponent trend sweeps.
        distribution: Entry distribution.
        symmetry_class: Hermitian or real symmetric.
        master_seed: The single seed of all randomness.
        sample_count: Samples per suite.
        e_min, e_max, e_count: Linear energy grid.
        etas: Explicit eta values; if empty, ``eta_count`` geometric values from
            M^(-1+gamma) to ``eta_max``.
        outside_energies, outside_etas: Grid of the outside law.
        mp_points: Spectral parameters w of the hard-edge suite; if empty a default
            grid at and near the hard edge is used.
        gamma: Exponent of the spectral domain D(gamma).
        epsilons: Exponents of the exceedance statistics.
        rigidity_epsilon: Bulk exponent of the rigidity suite.
        negative_control: Feed the identity suite a broken input.
        threads: Size of the worker pool.
        out_dir: Output directory of the reports.
    Raises:
        ValueError
    """
    # pylint: disable=too-many-instance-attributes
    profile_kind: ProfileKind = ProfileKind.FLAT_BIPARTITE
    dim: int = 128
    bandwidth: Optional[int] = None
    profile_path: Optional[str] = None
    m_bound: Optional[float] = None
    rho: Optional[float] = None
    delta: float = DEFAULT_DELTA
    tol: float = DEFAULT_TOL
    dims: Tuple[int, ...] = ()
    distribution: Distribution = Distribution.REAL_GAUSSIAN
    symmetry_class: SymmetryClass = SymmetryClass.REAL_SYMMETRIC
    master_seed: int = 0
    sample_count: int = 10
    e_min: float = -2.2
    e_max: float = 2.2
    e_count: int = 11
    etas: Tuple[float, ...] = ()
    eta_count: int = 4
    eta_max: float = 1.0
    outside_energies: Tuple[float, ...] = (2.2, 2.5, 3.0)
    outside_etas: Tuple[float, ...] = (0.05, 0.5)
    mp_points: Tuple[complex, ...] = ()
    gamma: float = DEFAULT_GAMMA
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    rigidity_epsilon: float = 0.5
    negative_control: bool = False
    threads: int = 1
    out_dir: str = 'reports'

    def __post_init__(self):
        if self.profile_kind is not ProfileKind.FILE:
            for dim in (self.dim,) + tuple(self.dims):
                if dim < 2:
                    raise ValueError('Profile dims have to be >= 2, got {0}'.format(dim))
                if self.profile_kind in BIPARTITE_KINDS and dim % 2:
                    raise ValueError('Bipartite profiles need an even dim, got {0}'.format(dim))
        if self.profile_kind in BAND_KINDS and self.bandwidth is None:
            raise ValueError('Profile kind {0} needs a bandwidth'.format(self.profile_kind.value))
        if self.profile_kind is ProfileKind.FILE and not self.profile_path:
            raise ValueError('Profile kind file needs a path')
        if not 0 < self.gamma < 1:
            raise ValueError('gamma has to lie in (0, 1), got {0!r}'.format(self.gamma))
        if self.e_count < 1 or (not self.etas and self.eta_count < 1):
            raise ValueError('The z-grid is empty')
        if not self.epsilons:
            raise ValueError('Need at least one epsilon')
        if self.threads < 1:
            raise ValueError('threads has to be positive, got {0}'.format(self.threads))
        # validates seed, sample count and distribution/symmetry compatibility
        self.ensemble  # pylint: disable=pointless-statement

    @property
    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(self.distribution, self.symmetry_class, self.master_seed,
                              self.sample_count)

    def canonical(self) -> str:
        """ One "name = value" line per field that affects results, sorted by name. """
        lines = []
        for item in sorted(fields(self), key=lambda f: f.name):
            if item.name in UNHASHED_FIELDS:
                continue
            value = getattr(self, item.name)
            if isinstance(value, (ProfileKind, Distribution, SymmetryClass)):
                value = value.value
            elif isinstance(value, tuple):
                value = ', '.join(repr(entry) for entry in value)
            else:
                value = repr(value)
            lines.append('{0} = {1}'.format(item.name, value))
        return '\n'.join(lines) + '\n'

    def digest(self) -> str:
        """ SHA-256 hex digest of the canonical text. """
        return hashlib.sha256(self.canonical().encode('utf-8')).hexdigest()


_KEYS = {
    # field: (section, key, parser)
    'profile_kind': ('profile', 'kind', ProfileKind),
    'dim': ('profile', 'dim', int),
    'bandwidth': ('profile', 'bandwidth', int),
    'profile_path': ('profile', 'path', str),
    'm_bound': ('profile', 'm_bound', float),
    'rho': ('profile', 'rho', float),
    'delta': ('profile', 'delta', float),
    'tol': ('profile', 'tol', float),
    'dims': ('profile', 'dims', lambda text: tuple(int(v) for v in _split(text))),
    'distribution': ('ensemble', 'distribution', Distribution),
    'symmetry_class': ('ensemble', 'symmetry', SymmetryClass),
    'master_seed': ('ensemble', 'master_seed', int),
    'sample_count': ('ensemble', 'samples', int),
    'e_min': ('grid', 'e_min', float),
    'e_max': ('grid', 'e_max', float),
    'e_count': ('grid', 'e_count', int),
    'etas': ('grid', 'etas', lambda text: tuple(float(v) for v in _split(text))),
    'eta_count': ('grid', 'eta_count', int),
    'eta_max': ('grid', 'eta_max', float),
    'outside_energies': ('grid', 'outside_energies',
                         lambda text: tuple(float(v) for v in _split(text))),
    'outside_etas': ('grid', 'outside_etas', lambda text: tuple(float(v) for v in _split(text))),
    'mp_points': ('grid', 'mp_points', lambda text: tuple(complex(v) for v in _split(text))),
    'gamma': ('grid', 'gamma', float),
    'epsilons': ('verify', 'epsilons', lambda text: tuple(float(v) for v in _split(text))),
    'rigidity_epsilon': ('verify', 'rigidity_epsilon', float),
    'negative_control': ('verify', 'negative_control', None),
    'threads': ('verify', 'threads', int),
    'out_dir': ('output', 'directory', str),
}

_ENVIRONMENT = {'master_seed': (SEED_VARIABLE, int), 'threads': (THREADS_VARIABLE, int)}


def _split(text: str) -> List[str]:
    return [part.strip().replace(' ', '') for part in text.split(',') if part.strip()]


def read_file(path: str) -> dict:
    """
    Reads the keys of an INI experiment file.

    Returns:
        Dict of ExperimentConfig field name -> parsed value for every key present.
    Raises:
        OSError: if the file cannot be read.
        ValueError: on syntax errors, unknown sections or keys and bad values.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except configparser.Error as err:
        raise ValueError('Cannot parse {0}: {1}'.format(path, err)) from err
    known = {(section, key): name for name, (section, key, _) in _KEYS.items()}
    values = {}
    for section in parser.sections():
        for key in parser[section]:
            if (section, key) not in known:
                raise ValueError('Unknown key [{0}] {1} in {2}'.format(section, key, path))
            name = known[(section, key)]
            convert = _KEYS[name][2]
            try:
                if convert is None:
                    values[name] = parser.getboolean(section, key)
                else:
                    values[name] = convert(parser.get(section, key))
            except ValueError as err:
                raise ValueError('Bad value for [{0}] {1}: {2}'.format(section, key, err)) from err
    return values


def load_config(path: str = None, overrides: Mapping = None,
                environ: Mapping = None) -> ExperimentConfig:
    """
    Resolves an ExperimentConfig from defaults, a file, the environment and overrides.

    Args:
        path: The INI file, None for defaults only.
        overrides: Field name -> value from the command line; None values are ignored.
        environ: The environment, defaults to ``os.environ``.
    Returns:
        The frozen ExperimentConfig.
    Raises:
        OSError
        ValueError
    """
    environ = os.environ if environ is None else environ
    values = read_file(path) if path is not None else {}
    for name, (variable, convert) in _ENVIRONMENT.items():
        if environ.get(variable):
            try:
                values[name] = convert(environ[variable])
            except ValueError as err:
                raise ValueError('Bad value for {0}: {1}'.format(variable, err)) from err
    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value
    config = ExperimentConfig(**values)
    logger.debug('Resolved configuration %s', config.digest())
    return config


def build_profile(config: ExperimentConfig, dim: int = None) -> VarianceProfile:
    """
    Builds the variance profile of a configuration.

    Args:
        config: The configuration.
        dim: Total dimension to build instead of ``config.dim``.
    Returns:
        The VarianceProfile, with ``config.m_bound`` if set.
    Raises:
        OSError: if a profile file cannot be read.
        ValueError
    """
    dim = config.dim if dim is None else dim
    kind = config.profile_kind
    if kind is ProfileKind.FILE:
        profile = VarianceProfile.from_file(config.profile_path, tol=config.tol)
    elif kind in BIPARTITE_KINDS:
        profile = build_bipartite_profile(build_factor(config, dim))
    elif kind is ProfileKind.BAND_PRIMITIVE:
        profile = build_band_profile(dim, config.bandwidth)
    else:
        profile = VarianceProfile.flat(dim)
    if config.m_bound is not None or config.rho is not None:
        profile = VarianceProfile(
            profile.entries,
            m_bound=profile.m_bound if config.m_bound is None else config.m_bound,
            gap=profile.declared_gap if config.rho is None else config.rho, tol=config.tol)
    return profile


def build_factor(config: ExperimentConfig, dim: int = None) -> BipartiteFactor:
    """
    The factor A of a single-block bipartite configuration.

    Raises:
        ValueError: if the profile is not one bipartite block.
    """
    dim = config.dim if dim is None else dim
    kind = config.profile_kind
    if kind is ProfileKind.FLAT_BIPARTITE:
        factor = BipartiteFactor.flat(dim // 2)
    elif kind is ProfileKind.BAND_BIPARTITE:
        factor = BipartiteFactor.circulant_band(dim // 2, config.bandwidth)
    elif kind is ProfileKind.FILE:
        decomposition = decompose(build_profile(config))
        if decomposition.p != 1 or decomposition.q != 0:
            raise ValueError('Profile file holds p={0} bipartite and q={1} primitive blocks, '
                             'need a single bipartite block'.format(decomposition.p,
                                                                    decomposition.q))
        factor = decomposition.bipartite_blocks[0]
    else:
        raise ValueError('Profile kind {0} has no bipartite factor'.format(kind.value))
    if config.m_bound is not None:
        factor = BipartiteFactor(factor.entries, m_bound=config.m_bound, tol=config.tol)
    return factor


def spectral_grid(config: ExperimentConfig, m_bound: float) -> List[SpectralPoint]:
    """ The z-grid: linear in E, explicit or geometric in eta, etas varying fastest. """
    energies = energy_grid(config.e_min, config.e_max, config.e_count)
    etas = config.etas or eta_grid(DomainParams(config.gamma, m_bound), config.eta_count,
                                   config.eta_max)
    return z_grid(energies, etas)


def outside_grid(config: ExperimentConfig, m_bound: float) -> List[SpectralPoint]:
    """
    The z-list of the outside law. Points violating eta sqrt(kappa + eta) >= M^(-1+gamma)
    at this M are dropped with a warning.

    Raises:
        ValueError: if no point is left.
    """
    points = z_grid(config.outside_energies, config.outside_etas)
    kept = [z for z in points if outside_domain_ok(z, m_bound, config.gamma)]
    if len(kept) < len(points):
        logger.warning('Dropped %d outside points not admissible at M = %.6g: %s',
                       len(points) - len(kept), m_bound,
                       ', '.join(str(z.z) for z in points if z not in kept))
    if not kept:
        raise ValueError('No outside point is admissible at M = {0!r}'.format(m_bound))
    return kept


def mp_grid(config: ExperimentConfig, m_bound: float, count: int = 11) -> List[complex]:
    """
    The w-grid of the hard-edge suite: ``config.mp_points``, or by default
    w = i M^(-1+gamma) at the hard edge followed by Re w in (0, 3.5] with
    Im w = 2 max(1, sqrt(Re w)) M^(-1+gamma).
    """
    if config.mp_points:
        return list(config.mp_points)
    scale = m_bound ** (-1.0 + config.gamma)
    grid = [complex(0.0, scale)]
    for real in np.linspace(0.0, 3.5, count)[1:]:
        grid.append(complex(real, 2.0 * max(1.0, np.sqrt(real)) * scale))
    return grid
