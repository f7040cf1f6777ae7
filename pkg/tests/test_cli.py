""" Tests for the command line front end. """

import json
import os
import tempfile
import unittest

import numpy as np

from gwlaw import __version__
from gwlaw.cli import applicable_suites, main
from gwlaw.config import ExperimentConfig
from gwlaw.kinds import ExitCode, ProfileKind, Suite
from gwlaw.profile import BipartiteFactor, VarianceProfile, block_diagonal, \
    build_bipartite_profile, permute_profile

SMOKE = """
[profile]
kind = flat-bipartite
dim = 32

[ensemble]
master_seed = 1
samples = 3

[grid]
e_count = 3
eta_count = 2
"""


class test_Main(unittest.TestCase):
    """ Runs the subcommands end to end on small experiments. """

    def setUp(self) -> None:
        self.directory = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.directory.name, 'reports')

    def tearDown(self) -> None:
        self.directory.cleanup()

    def _config(self, text: str, name: str = 'experiment.ini') -> str:
        path = os.path.join(self.directory.name, name)
        with open(path, 'w') as handle:
            handle.write(text)
        return path

    def _profile_config(self, profile: VarianceProfile) -> str:
        path = os.path.join(self.directory.name, 'profile.txt')
        profile.to_file(path)
        return self._config('[profile]\nkind = file\npath = {0}\ndelta = 0\n'.format(path))

    def _load(self, name: str, out: str = None) -> dict:
        with open(os.path.join(out or self.out, name)) as handle:
            return json.load(handle)

    def test_check_profile(self):
        """ A valid profile exits 0 and writes the assumptions with provenance. """
        code = main(['check-profile', '--config', self._config(SMOKE), '--out', self.out])
        report = self._load('assumptions.json')
        with self.subTest('exit'):
            self.assertEqual(code, ExitCode.PASS)
        with self.subTest('passed'):
            self.assertTrue(report['passed'])
        with self.subTest('provenance'):
            self.assertEqual(report['provenance']['version'], __version__)
            self.assertEqual(len(report['provenance']['config_sha256']), 64)

    def test_broken_profile(self):
        """ A profile with a row summing to 1.1 exits 1 and names the row. """
        entries = build_bipartite_profile(BipartiteFactor.flat(4)).entries.copy()
        entries[2] *= 1.1
        code = main(['check-profile', '--config', self._profile_config(VarianceProfile(entries)),
                     '--out', self.out])
        with self.subTest('exit'):
            self.assertEqual(code, ExitCode.FAILURE)
        with self.subTest('row'):
            self.assertEqual(self._load('assumptions.json')['a2_bad_rows'], [2])

    def test_declared_rho(self):
        """ A band profile whose interior spectrum exceeds the configured rho exits 1. """
        band = '[profile]\nkind = band-primitive\ndim = 64\nbandwidth = 4\n'
        with self.subTest('too_small'):
            code = main(['check-profile', '--config', self._config(band + 'rho = 0.1\n'),
                         '--out', self.out])
            report = self._load('assumptions.json')
            self.assertEqual(code, ExitCode.FAILURE)
            self.assertFalse(report['a3'])
            self.assertEqual(report['rho_declared'], 0.1)
        with self.subTest('wide_enough'):
            code = main(['check-profile', '--config',
                         self._config(band + 'rho = 0.99\n', name='wide.ini'), '--out', self.out])
            self.assertEqual(code, ExitCode.PASS)

    def test_decompose(self):
        """ The swap profile and a relabelled composite profile decompose cleanly. """
        with self.subTest('swap'):
            code = main(['decompose', '--config',
                         self._profile_config(VarianceProfile([[0.0, 1.0], [1.0, 0.0]])),
                         '--out', self.out])
            report = self._load('decomposition.json')
            self.assertEqual(code, ExitCode.PASS)
            self.assertEqual((report['decomposition']['p'], report['decomposition']['q']), (1, 0))
        with self.subTest('composite'):
            diagonal = block_diagonal(build_bipartite_profile(BipartiteFactor.flat(4)),
                                      VarianceProfile.flat(4))
            shuffled = permute_profile(diagonal, np.random.default_rng(2).permutation(12))
            code = main(['decompose', '--config', self._profile_config(shuffled),
                         '--out', self.out])
            report = self._load('decomposition.json')
            self.assertEqual(code, ExitCode.PASS)
            self.assertEqual((report['decomposition']['p'], report['decomposition']['q']), (1, 1))
            self.assertTrue(report['certificate']['passed'])

    def test_unequal_classes(self):
        """ A bipartite component with unequal colour classes exits 1. """
        star = VarianceProfile([[0.0, 0.5, 0.5], [0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
        code = main(['decompose', '--config', self._profile_config(star), '--out', self.out])
        with self.subTest('exit'):
            self.assertEqual(code, ExitCode.FAILURE)
        with self.subTest('report'):
            self.assertFalse(self._load('decomposition.json')['passed'])

    def test_bad_singleton(self):
        """ An isolated index with s_ii != 1 is a structural failure, not a broken input. """
        singleton = VarianceProfile([[0.5, 0.0], [0.0, 1.0]])
        code = main(['decompose', '--config', self._profile_config(singleton), '--out', self.out])
        with self.subTest('exit'):
            self.assertEqual(code, ExitCode.FAILURE)
        with self.subTest('report'):
            self.assertIn('Singleton', self._load('decomposition.json')['error'])

    def test_identities(self):
        """ The identity suite passes, writes its reports and is reproducible. """
        path = self._config(SMOKE)
        second = os.path.join(self.directory.name, 'again')
        codes = [main(['verify', '--config', path, '--suite', 'identities', '--out', out])
                 for out in (self.out, second)]
        with self.subTest('exit'):
            self.assertEqual(codes, [ExitCode.PASS, ExitCode.PASS])
        with self.subTest('files'):
            for suffix in ('.csv', '.json', '.dat'):
                self.assertTrue(os.path.exists(os.path.join(self.out, 'identities' + suffix)))
        with self.subTest('summary'):
            self.assertEqual(self._load('summary.json')['suites'], {'identities': True})
        with self.subTest('reproducible'):
            with open(os.path.join(self.out, 'identities.csv'), 'rb') as first_csv, \
                    open(os.path.join(second, 'identities.csv'), 'rb') as second_csv:
                self.assertEqual(first_csv.read(), second_csv.read())
            self.assertEqual(self._load('identities.json'), self._load('identities.json', second))

    def test_negative_control(self):
        """ A broken input makes the identity suite exit 1. """
        path = self._config(SMOKE + '\n[verify]\nnegative_control = true\n')
        code = main(['verify', '--config', path, '--suite', 'identities', '--out', self.out])
        self.assertEqual(code, ExitCode.FAILURE)

    def test_seed_flag(self):
        """ --seed overrides the file and is recorded in the provenance. """
        code = main(['verify', '--config', self._config(SMOKE), '--suite', 'identities',
                     '--seed', '7', '--threads', '2', '--out', self.out])
        with self.subTest('exit'):
            self.assertEqual(code, ExitCode.PASS)
        with self.subTest('provenance'):
            self.assertEqual(self._load('identities.json')['provenance']['master_seed'], 7)

    def test_infrastructure(self):
        """ Missing or invalid inputs exit 2. """
        with self.subTest('missing_config'):
            self.assertEqual(main(['check-profile', '--config',
                                   os.path.join(self.directory.name, 'absent.ini')]),
                             ExitCode.INFRASTRUCTURE)
        with self.subTest('missing_profile'):
            path = self._config('[profile]\nkind = file\npath = {0}\n'.format(
                os.path.join(self.directory.name, 'absent.txt')))
            self.assertEqual(main(['check-profile', '--config', path, '--out', self.out]),
                             ExitCode.INFRASTRUCTURE)
        with self.subTest('invalid_value'):
            path = self._config('[ensemble]\nsamples = 0\n', name='invalid.ini')
            self.assertEqual(main(['verify', '--config', path]), ExitCode.INFRASTRUCTURE)
        with self.subTest('unknown_suite'):
            with self.assertRaises(SystemExit):
                main(['verify', '--suite', 'nonsense'])


class test_Suites(unittest.TestCase):
    """ Tests which suites 'all' runs. """

    def test_applicable(self):
        """ The hard-edge suite needs a bipartite kind, Gamma^ growth further dims. """
        with self.subTest('bipartite'):
            suites = applicable_suites(ExperimentConfig(dims=(256,)))
            self.assertIn(Suite.MP_HARD_EDGE, suites)
            self.assertIn(Suite.GAMMA_HAT, suites)
        with self.subTest('primitive'):
            suites = applicable_suites(ExperimentConfig(profile_kind=ProfileKind.FLAT_PRIMITIVE))
            self.assertNotIn(Suite.MP_HARD_EDGE, suites)
            self.assertNotIn(Suite.GAMMA_HAT, suites)
        with self.subTest('all_excluded'):
            self.assertNotIn(Suite.ALL, applicable_suites(ExperimentConfig()))


if __name__ == '__main__':
    unittest.main()
