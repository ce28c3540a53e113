import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest.mock import patch

from omqm.ObservationLab import create_parser, dispatch, overrides_from
from omqm.managers import MANIFEST_NAME
from omqm.models import ClaimRecord


fixtures_dir = os.path.join(os.path.dirname(__file__), 'fixtures')


def run_cli(*argv):
    stdout = io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(io.StringIO()):
        code = dispatch(list(argv))
    return code, stdout.getvalue()


class CLITestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out_dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def read(self, name, out_dir=None):
        with open(os.path.join(out_dir or self.out_dir, name)) as f:
            return f.read()

    def test_collapse(self):
        code, stdout = run_cli('collapse', '--l1', '7', '--n', '2', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('k_star=1', stdout)
        payload = json.loads(self.read('collapse.json'))
        self.assertEqual(payload['k_star'], 1)
        self.assertTrue(payload['paths_agree'])
        self.assertEqual(payload['reduction'], 'mod-2n')
        manifest = json.loads(self.read(MANIFEST_NAME))
        self.assertEqual([a['name'] for a in manifest['artifacts']], ['collapse.csv', 'collapse.json'])
        self.assertEqual(manifest['config']['collapse']['l1'], 7)

    def test_usage_errors(self):
        self.assertEqual(run_cli()[0], 2)
        self.assertEqual(run_cli('collapse', '--bogus')[0], 2)
        self.assertEqual(run_cli('teleport')[0], 2)
        self.assertEqual(run_cli('collapse', '--n', '0', '--out-dir', self.out_dir)[0], 2)
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, MANIFEST_NAME)))

    def test_failed_evaluation(self):
        code, _ = run_cli('epr', '--l1a', '5', '--l1b', '10', '--b', '7', '--out-dir', self.out_dir)
        self.assertEqual(code, 1)

    def test_formats(self):
        code, _ = run_cli('collapse', '--formats', 'json', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, 'collapse.csv')))

    def test_born_is_reproducible(self):
        other = os.path.join(self.out_dir, 'again')
        args = ('born', '--l1', '1000', '--n', '8', '--samples', '5000', '--seed', '5')
        self.assertEqual(run_cli(*args, '--out-dir', self.out_dir)[0], 0)
        self.assertEqual(run_cli(*args, '--out-dir', other)[0], 0)
        self.assertEqual(self.read('born-histogram.csv'), self.read('born-histogram.csv', other))
        self.assertEqual(len(self.read('born-histogram.csv').splitlines()), 9)

    def test_born_svg(self):
        code, _ = run_cli('born', '--samples', '2000', '--svg', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('<svg', self.read('born-histogram.svg'))

    def test_epr(self):
        code, stdout = run_cli('epr', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('orient_a=1 orient_b=-1', stdout)
        payload = json.loads(self.read('epr.json'))
        self.assertTrue(payload['key_share']['agreed'])
        self.assertLess(payload['volume_ledger']['residual'], 1e-10)

    def test_epr_without_ledger(self):
        code, _ = run_cli('epr', '--l1a', '10', '--l1b', '12', '--b', '10', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIsNone(json.loads(self.read('epr.json'))['volume_ledger'])

    def test_epr_batch(self):
        code, stdout = run_cli('epr', '--batch', f'{fixtures_dir}/epr_batch.jsonl', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('scenarios=3 anticorrelated=True', stdout)
        self.assertEqual(len(json.loads(self.read('epr-batch.json'))), 3)
        self.assertEqual(len(self.read('epr-batch.csv').splitlines()), 4)

    def test_epr_batch_with_bad_line(self):
        path = os.path.join(self.out_dir, 'batch.jsonl')
        with open(path, 'w') as f:
            f.write('{"l1a": 10, "l1b": 11, "b": 1, "n": 2}\n{"l1a": 10}\n')
        code, stdout = run_cli('epr', '--batch', path, '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('scenarios=1 anticorrelated=True errors=1', stdout)
        rows = self.read('epr-batch.csv').splitlines()
        self.assertTrue(rows[2].startswith('2,'))
        self.assertIn('KeyError', rows[2])

    def test_numtheory_cache(self):
        cache = os.path.join(self.out_dir, 'table.bin')
        args = ('numtheory', '--table-bound', '1000', '--rows', '10', '--cache', cache, '--out-dir', self.out_dir)
        self.assertEqual(run_cli(*args)[0], 0)
        self.assertTrue(os.path.exists(cache))
        first = self.read('numtheory.csv')
        self.assertEqual(run_cli(*args)[0], 0)
        self.assertEqual(self.read('numtheory.csv'), first)
        self.assertEqual(first.splitlines()[1], '1,1,1,1,0.0,0.0')
        self.assertTrue(json.loads(self.read('numtheory.json'))['wave_function_matches_lcm'])

    def test_zeros(self):
        code, stdout = run_cli('zeros', '--t-max', '15', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('count=1', stdout)
        lines = self.read('zeros.txt').splitlines()
        self.assertTrue(lines[0].startswith('# omqm-zeros v1'))
        self.assertAlmostEqual(float(lines[1]), 14.134725, places=5)

    def test_weierstrass(self):
        code, _ = run_cli('weierstrass', '--grid', '3', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        payload = json.loads(self.read('weierstrass.json'))
        self.assertLess(payload['cross_method_relative_difference'], 1e-6)
        self.assertLess(payload['max_ode_residual'], 1e-8)
        self.assertEqual(len(self.read('weierstrass-grid.csv').splitlines()), 10)

    def test_chaos(self):
        code, stdout = run_cli(
            'chaos', '--rossler', '0.2,0.2,5.7,0.01,60', '--transient', '10', '--feigenbaum-levels', '6',
            '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('delta=', stdout)
        self.assertEqual(json.loads(self.read('chaos.json'))['rossler']['t_total'], 60.0)

    def test_verify_json(self):
        records = [ClaimRecord.evaluate('a', 1.0, 1.0, 0.0), ClaimRecord.evaluate('b', 1.0)]
        with patch('omqm.ObservationLab.run_ledger', return_value=records):
            code, stdout = run_cli('verify', '--json', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertEqual([r['status'] for r in json.loads(stdout)], ['CONFIRMED', 'REPORT-ONLY'])
        self.assertEqual(json.loads(self.read('ledger.json')), json.loads(stdout))

    def test_verify_summary(self):
        records = [ClaimRecord.evaluate('a', 1.0, 2.0, 0.0)]
        with patch('omqm.ObservationLab.run_ledger', return_value=records):
            code, stdout = run_cli('verify', '--out-dir', self.out_dir)
        self.assertEqual(code, 0)
        self.assertIn('claims=1', stdout)
        self.assertIn('DISCREPANT=1', stdout)


class ParserTestCase(unittest.TestCase):

    def test_overrides(self):
        args = create_parser().parse_args(['born', '--sigma', '2.5', '--seed', '3'])
        self.assertEqual(overrides_from(args), {'born.sigma': 2.5, 'run.seed': 3})

    def test_rossler_overrides(self):
        args = create_parser().parse_args(['chaos', '--rossler', '0.1,0.1,14,0.005,100'])
        overrides = overrides_from(args)
        self.assertEqual(overrides['chaos.c'], 14.0)
        self.assertEqual(overrides['chaos.dt'], 0.005)
