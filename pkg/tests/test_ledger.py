import json
import unittest
from unittest.mock import patch

from omqm import ledger
from omqm.ledger import CLAIM_IDS, LedgerConfig, render_json, render_table, run_ledger
from omqm.models import ClaimStatus
from omqm.numtheory import DEFAULT_TABLE_BOUND, arithmetic_table


class LedgerRunTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.records = run_ledger()
        cls.by_id = {record.id: record for record in cls.records}

    def test_every_claim_present_in_order(self):
        self.assertEqual([record.id for record in self.records], list(CLAIM_IDS))

    def test_confirmed(self):
        for claim_id in ('n2-fifty-fifty', 'eq8-matching', 'eq50', 'psi-lcm', 'weierstrass-ode-standard',
                         'invariants-cross-method', 'quartic-sextic-constants'):
            self.assertEqual(self.by_id[claim_id].status, ClaimStatus.CONFIRMED, claim_id)

    def test_discrepant(self):
        for claim_id in ('eq8-printed', 'eq67', 'eq38', 'eq39', 'prime-power-zeta-sum', 'eq57-printed'):
            self.assertEqual(self.by_id[claim_id].status, ClaimStatus.DISCREPANT, claim_id)

    def test_report_only(self):
        for claim_id in ('eq66', 'born-width'):
            self.assertEqual(self.by_id[claim_id].status, ClaimStatus.REPORT_ONLY, claim_id)

    def test_dirichlet_share(self):
        record = self.by_id['eq38']
        self.assertAlmostEqual(record.computed, 1 / 10000)
        self.assertTrue(record.details['dirichlet_identity_holds'])

    def test_render_json(self):
        data = json.loads(render_json(self.records))
        self.assertEqual(len(data), len(CLAIM_IDS))
        self.assertEqual(data[0]['id'], CLAIM_IDS[0])

    def test_render_json_is_reproducible(self):
        self.assertEqual(render_json(run_ledger(workers=1)), render_json(self.records))

    def test_render_table(self):
        lines = render_table(self.records).splitlines()
        self.assertTrue(lines[0].startswith('id'))
        self.assertEqual(len(lines), len(CLAIM_IDS) + 1)


class LedgerFailureTestCase(unittest.TestCase):

    def test_failure_is_recorded_in_band(self):
        def failing(config, constants):
            raise ZeroDivisionError('division by zero')

        with patch.dict(ledger.PROVIDERS, {('boom', 'bang'): failing}, clear=True):
            records = run_ledger(workers=1)
        self.assertEqual([record.id for record in records], ['bang', 'boom'])
        self.assertTrue(all(record.status == ClaimStatus.ERROR for record in records))
        self.assertIn('ZeroDivisionError', records[0].note)


class LedgerConfigTestCase(unittest.TestCase):

    def test_from_settings(self):
        config = LedgerConfig.from_settings({
            'verify': {'mertens_limit': 50, 'series_cutoff': None},
            'constants': {'D': 3.0, 'delta': None}})
        self.assertEqual(config.mertens_limit, 50)
        self.assertEqual(config.series_cutoff, 10 ** 6)
        self.assertEqual(config.D, 3.0)
        self.assertEqual(config.delta, LedgerConfig().delta)

    def test_table_bound_from_precision(self):
        config = LedgerConfig.from_settings({'precision': {'table_bound': 500}})
        self.assertEqual(config.table_bound, 500)
        self.assertEqual(LedgerConfig.from_settings({}).table_bound, DEFAULT_TABLE_BOUND)

    def test_providers_use_configured_table(self):
        config = LedgerConfig(dirichlet_limit=300, mertens_limit=200, psi_limit=150, table_bound=97)
        default = LedgerConfig(dirichlet_limit=300, mertens_limit=200, psi_limit=150)
        for provider in (ledger._dirichlet, ledger._mertens, ledger._psi_lcm):
            with patch('omqm.ledger.arithmetic_table', wraps=arithmetic_table) as table:
                records = provider(config, None)
            table.assert_called_once_with(97)
            expected = provider(default, None)
            for record, reference in zip(records, expected):
                self.assertAlmostEqual(record.computed, reference.computed, places=12)
            self.assertEqual([r.details for r in records], [r.details for r in expected])

    def test_fine_structure_tolerance(self):
        records = {r.id: r for r in ledger._fine_structure(LedgerConfig(fine_structure_tolerance=1e-6), None)}
        self.assertEqual(records['eq8-matching'].status, ClaimStatus.DISCREPANT)
