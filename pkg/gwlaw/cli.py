""" Command line front end of gwlaw.

Runs the profile -> decompose -> sample -> verify pipelines of an experiment
configuration and writes the reports. Every report embeds the SHA-256 digest of
the configuration and the package version.

Usage::

    gwlaw check-profile --config smoke.ini
    gwlaw decompose --config smoke.ini --out reports
    gwlaw verify --config smoke.ini --suite identities --seed 7 --threads 4 -v

Exit codes are 0 if every check passed, 1 if a check failed and 2 if the
configuration, a file or the numerics broke down.
"""

import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List

from gwlaw import __version__
from gwlaw.config import BIPARTITE_KINDS, ExperimentConfig, build_factor, build_profile, \
    load_config, mp_grid, outside_grid, spectral_grid
from gwlaw.errors import NumericalBreakdown, StructureError
from gwlaw.kinds import ExitCode, ProfileKind, Suite
from gwlaw.profile import validate_assumptions
from gwlaw.structure import certify_block_spectra, decompose
from gwlaw.verify import check_fluctuation_averaging, check_gamma_hat_growth, \
    check_identities, check_local_law, check_mp_hard_edge, check_outside_law, \
    check_rigidity, check_sce, dumps, exponent_trend

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'


def provenance(config: ExperimentConfig) -> dict:
    return {'config_sha256': config.digest(), 'version': __version__,
            'master_seed': config.master_seed}


def _write_json(config: ExperimentConfig, name: str, payload: dict) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, name)
    payload = dict(payload, provenance=provenance(config))
    with open(path, 'w') as handle:
        handle.write(dumps(payload) + '\n')
    logger.info('Wrote %s', path)
    return path


def _write_report(config: ExperimentConfig, name: str, report) -> bool:
    """ Writes <name>.csv, <name>.json and <name>.dat and returns whether the report passed. """
    os.makedirs(config.out_dir, exist_ok=True)
    stem = os.path.join(config.out_dir, name)
    report.to_csv(stem + '.csv')
    report.to_json(stem + '.json', provenance=provenance(config))
    report.write_plot_data(stem + '.dat')
    passed = report.passed()
    logger.info('Suite %s %s, reports in %s.*', name, 'passed' if passed else 'FAILED', stem)
    return passed


def cmd_check_profile(config: ExperimentConfig) -> ExitCode:
    """ Checks (A1)-(A3) of the configured profile and writes assumptions.json. """
    profile = build_profile(config)
    report = validate_assumptions(profile, delta=config.delta, tol=config.tol, rho=config.rho)
    _write_json(config, 'assumptions.json', report.to_dict())
    if not report.passed:
        logger.error('Profile violates its assumptions: %s', json.dumps(
            {key: value for key, value in report.to_dict().items()
             if key in ('symmetric', 'a1', 'a2', 'a2_bad_rows', 'a3', 'rho', 'rho_declared',
                        'error')}, default=str))
        return ExitCode.FAILURE
    return ExitCode.PASS


def cmd_decompose(config: ExperimentConfig) -> ExitCode:
    """ Decomposes the configured profile, certifies the block spectra, writes decomposition.json. """
    profile = build_profile(config)
    try:
        decomposition = decompose(profile)
    except StructureError as err:
        logger.error('No consistent block structure: %s', err)
        _write_json(config, 'decomposition.json', {'error': str(err), 'passed': False})
        return ExitCode.FAILURE
    certificate = certify_block_spectra(decomposition, rho=config.rho, tol=config.tol)
    passed = certificate.passed and not decomposition.inconsistencies
    _write_json(config, 'decomposition.json', {'decomposition': decomposition.to_dict(),
                                               'certificate': certificate.to_dict(),
                                               'passed': passed})
    logger.info('Decomposed into p=%d bipartite and q=%d primitive blocks', decomposition.p,
                decomposition.q)
    return ExitCode.PASS if passed else ExitCode.FAILURE


def _run_local_law(config: ExperimentConfig) -> bool:
    profile = build_profile(config)
    report = check_local_law(profile, config.ensemble, spectral_grid(config, profile.m_bound),
                             config.epsilons, config.gamma, config.threads)
    passed = _write_report(config, Suite.LOCAL_LAW.value, report)
    if config.dims and config.profile_kind is not ProfileKind.FILE:
        reports = [report]
        for dim in config.dims:
            scaled = build_profile(config, dim)
            reports.append(check_local_law(scaled, config.ensemble,
                                           spectral_grid(config, scaled.m_bound),
                                           config.epsilons, config.gamma, config.threads))
        trend = exponent_trend(reports)
        os.makedirs(config.out_dir, exist_ok=True)
        trend.to_csv(os.path.join(config.out_dir, 'local-law-trend.csv'), index=False,
                     float_format='%.17g')
        if trend['flagged'].any():
            logger.error('Empirical exponent grows faster than allowed:\n%s', trend)
            passed = False
    return passed


def _run_outside(config: ExperimentConfig) -> bool:
    profile = build_profile(config)
    report = check_outside_law(profile, config.ensemble, outside_grid(config, profile.m_bound),
                               config.epsilons, config.gamma, config.threads)
    return _write_report(config, Suite.OUTSIDE.value, report)


def _run_rigidity(config: ExperimentConfig) -> bool:
    report = check_rigidity(build_profile(config), config.ensemble, config.rigidity_epsilon,
                            threads=config.threads)
    return _write_report(config, Suite.RIGIDITY.value, report)


def _run_sce(config: ExperimentConfig) -> bool:
    profile = build_profile(config)
    report = check_sce(profile, decompose(profile), config.ensemble,
                       spectral_grid(config, profile.m_bound), config.gamma, config.threads)
    return _write_report(config, Suite.SCE.value, report)


def _run_fa(config: ExperimentConfig) -> bool:
    profile = build_profile(config)
    report = check_fluctuation_averaging(profile, decompose(profile), config.ensemble,
                                         spectral_grid(config, profile.m_bound), config.gamma,
                                         config.threads)
    return _write_report(config, Suite.FA.value, report)


def _run_mp_hard_edge(config: ExperimentConfig) -> bool:
    factor = build_factor(config)
    report = check_mp_hard_edge(factor, config.ensemble, mp_grid(config, factor.m_bound),
                                config.epsilons, config.gamma, config.threads)
    return _write_report(config, Suite.MP_HARD_EDGE.value, report)


def _run_identities(config: ExperimentConfig) -> bool:
    profile = build_profile(config)
    report = check_identities(profile, decompose(profile), config.ensemble,
                              spectral_grid(config, profile.m_bound),
                              negative_control=config.negative_control, tol=config.tol,
                              threads=config.threads)
    return _write_report(config, Suite.IDENTITIES.value, report)


def _run_gamma_hat(config: ExperimentConfig) -> bool:
    dims = sorted(set((config.dim,) + tuple(config.dims)))
    profiles = [build_profile(config, dim) for dim in dims]
    report = check_gamma_hat_growth(profiles, gamma=config.gamma)
    return _write_report(config, Suite.GAMMA_HAT.value, report)


SUITES: Dict[Suite, Callable[[ExperimentConfig], bool]] = {
    Suite.LOCAL_LAW: _run_local_law,
    Suite.OUTSIDE: _run_outside,
    Suite.RIGIDITY: _run_rigidity,
    Suite.SCE: _run_sce,
    Suite.FA: _run_fa,
    Suite.MP_HARD_EDGE: _run_mp_hard_edge,
    Suite.IDENTITIES: _run_identities,
    Suite.GAMMA_HAT: _run_gamma_hat,
}


def applicable_suites(config: ExperimentConfig) -> List[Suite]:
    """ The suites 'all' runs: the hard-edge suite needs a bipartite factor, Gamma^ growth further dims. """
    suites = [Suite.IDENTITIES, Suite.LOCAL_LAW, Suite.OUTSIDE, Suite.RIGIDITY, Suite.SCE,
              Suite.FA]
    if config.profile_kind in BIPARTITE_KINDS:
        suites.append(Suite.MP_HARD_EDGE)
    if config.dims and config.profile_kind is not ProfileKind.FILE:
        suites.append(Suite.GAMMA_HAT)
    return suites


def cmd_verify(config: ExperimentConfig, suite: Suite) -> ExitCode:
    """ Runs one suite, or every applicable one for 'all'. """
    suites = applicable_suites(config) if suite is Suite.ALL else [suite]
    results = {}
    for name in suites:
        logger.info('Running suite %s', name.value)
        results[name.value] = SUITES[name](config)
    _write_json(config, 'summary.json', {'suites': results, 'passed': all(results.values())})
    return ExitCode.PASS if all(results.values()) else ExitCode.FAILURE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='INI experiment file')
    common.add_argument('--out', metavar='DIR', help='output directory of the reports')
    common.add_argument('--seed', type=int, metavar='U64',
                        help='master seed (flag > env:GWLAW_SEED > file > 0)')
    common.add_argument('--threads', type=int, metavar='K',
                        help='worker pool size (flag > env:GWLAW_THREADS > file > 1)')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')

    parser = argparse.ArgumentParser(prog='gwlaw', description='Numerical lab for local laws of '
                                     'generalized Wigner matrices with imprimitive variance '
                                     'profiles')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    commands.add_parser('check-profile', parents=[common],
                        help='check the model assumptions of the profile')
    commands.add_parser('decompose', parents=[common],
                        help='decompose the profile into irreducible blocks')
    verify = commands.add_parser('verify', parents=[common], help='run verification suites')
    verify.add_argument('--suite', default=Suite.ALL.value,
                        choices=[suite.value for suite in Suite],
                        help='suite to run (default: all)')
    return parser


def main(argv: List[str] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        config = load_config(args.config, overrides={'master_seed': args.seed,
                                                     'threads': args.threads,
                                                     'out_dir': args.out})
    except (OSError, ValueError) as err:
        logger.error('Invalid configuration: %s', err)
        return ExitCode.INFRASTRUCTURE
    try:
        if args.command == 'check-profile':
            return cmd_check_profile(config)
        if args.command == 'decompose':
            return cmd_decompose(config)
        return cmd_verify(config, Suite(args.suite))
    except (OSError, ValueError, NumericalBreakdown) as err:
        logger.error('%s failed: %s', args.command, err)
        return ExitCode.INFRASTRUCTURE


if __name__ == '__main__':
    sys.exit(main())
