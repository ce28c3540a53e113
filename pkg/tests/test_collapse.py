import itertools
import math
import random
import unittest

from omqm.collapse import (
    PATH_KEY, PATH_ZETA, BraidLevel, CertificationError, build_mixed_state, collapse_batch,
    key_cylinder_collapse, petal_volume_quadrature, scale_cut, zeta_stretch_collapse)
from omqm.numtheory import arithmetic_table, mertens
from omqm.omcore import OMConstants, OMScale


# Known value: the Euler-Mascheroni constant
EULER_GAMMA = 0.5772156649015329


class MixedStateTestCase(unittest.TestCase):

    def setUp(self):
        self.constants = OMConstants()

    def test_volumes(self):
        state = build_mixed_state(OMScale(100, 4), self.constants)
        alpha = self.constants.alpha_tilde
        self.assertAlmostEqual(state.vol_R, alpha * math.log(100))
        self.assertAlmostEqual(state.vol_H, alpha * state.scale.k_star)
        self.assertEqual(state.active_loops, 2)
        self.assertAlmostEqual(abs(state.value), math.exp(state.vol_R))

    def test_quadrature_matches_closed_form(self):
        alpha = self.constants.alpha_tilde
        for l1 in (1, 2, 100, 10 ** 4):
            self.assertLess(abs(petal_volume_quadrature(l1, alpha) - alpha * math.log(l1)), 1e-12)

    def test_scale_cut_keeps_curvature(self):
        state = build_mixed_state(OMScale(100, 4), self.constants)
        cut = scale_cut(state, 10)
        self.assertEqual(cut.scale.l1, 10)
        self.assertAlmostEqual(cut.vol_R + cut.compensated_vol_R, state.vol_R)
        again = scale_cut(cut, 3)
        self.assertAlmostEqual(again.vol_R + again.compensated_vol_R, state.vol_R)

    def test_compensation_does_not_affect_equality(self):
        cut = scale_cut(build_mixed_state(OMScale(100, 4), self.constants), 10)
        self.assertEqual(cut, build_mixed_state(OMScale(10, 4), self.constants))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            build_mixed_state(OMScale(0, 2))
        state = build_mixed_state(OMScale(10, 2))
        with self.assertRaises(ValueError):
            scale_cut(state, 0)
        with self.assertRaises(ValueError):
            scale_cut(state, 11)


class BraidLevelTestCase(unittest.TestCase):

    def test_rotation_is_mobius(self):
        table = arithmetic_table(100000)
        expected = {1: 1, 2: -1, 4: 0, 6: 1, 30: -1, 12: 0}
        for index, rotation in expected.items():
            self.assertEqual(BraidLevel.from_index(index, table).rotation, rotation, index)

    def test_crossing_profile(self):
        self.assertEqual(BraidLevel.from_index(12).crossing_profile, ((2, 2), (3, 1)))


class CollapsePathTestCase(unittest.TestCase):

    def setUp(self):
        self.constants = OMConstants()
        self.table = arithmetic_table(100000)

    def test_small_scale(self):
        key = key_cylinder_collapse(OMScale(7, 2), self.constants, self.table)
        zeta = zeta_stretch_collapse(OMScale(7, 2), self.constants, self.table)
        self.assertEqual(key.k_star, 1)
        self.assertEqual(zeta.k_star, 1)
        self.assertTrue(zeta.convention)
        self.assertIsNone(zeta.certificate)
        self.assertEqual(key.rotation_trace, (1,))

    def test_rotation_sum_is_mertens(self):
        scale = OMScale(10, 8)
        key = key_cylinder_collapse(scale, self.constants, self.table)
        self.assertEqual(key.k_star, 5)
        self.assertEqual(key.rotation_trace, (1, -1, -1, 0, -1))
        self.assertEqual(key.rotation_sum, mertens(5))

    def test_rotation_sum_is_mertens_to_ten_thousand(self):
        n = 10 ** 4 + 1
        full = key_cylinder_collapse(OMScale(2 * 10 ** 4 + 1, n), self.constants, self.table)
        self.assertEqual(full.k_star, 10 ** 4)
        for k, running in enumerate(itertools.accumulate(full.rotation_trace), start=1):
            self.assertEqual(running, mertens(k, self.table), k)
        for k in range(0, 10 ** 4 + 1, 499):
            outcome = key_cylinder_collapse(OMScale(2 * k + 1, n), self.constants, self.table)
            self.assertEqual(outcome.k_star, k)
            self.assertEqual(outcome.rotation_trace, full.rotation_trace[:k])

    def test_certificate(self):
        outcome = zeta_stretch_collapse(OMScale(10, 8), self.constants, self.table)
        self.assertFalse(outcome.convention)
        self.assertEqual(outcome.k_star, 5)
        self.assertAlmostEqual(outcome.certificate.zeta_at_t_star, 5.0, places=9)
        self.assertGreater(outcome.certificate.t_star, 1)
        self.assertEqual(outcome.rotation_sum, -2)

    def test_uncertifiable_tolerance(self):
        with self.assertRaises(CertificationError) as context:
            zeta_stretch_collapse(OMScale(10, 8), self.constants, self.table, tolerance=0.0)
        self.assertIn('tail bound', str(context.exception))

    def test_large_scales_agree(self):
        for n in (10 ** 4, 10 ** 5):
            scale = OMScale(2 * n - 1, n)
            key = key_cylinder_collapse(scale, self.constants, self.table)
            zeta = zeta_stretch_collapse(scale, self.constants, self.table)
            self.assertEqual(key.k_star, n - 1)
            self.assertEqual(zeta.k_star, n - 1)
            self.assertEqual(zeta.rotation_sum, key.rotation_sum)
            self.assertEqual(zeta.phase, key.phase)
            certificate = zeta.certificate
            self.assertLess(abs(certificate.zeta_at_t_star - (n - 1)), 1e-8)
            # zeta(1 + e) = 1/e + gamma + O(e)
            self.assertAlmostEqual(certificate.t_offset * (n - 1 - EULER_GAMMA), 1.0, delta=1e-8)
            self.assertEqual(certificate.t_star, 1 + certificate.t_offset)

    def test_phase(self):
        outcome = key_cylinder_collapse(OMScale(10, 8), self.constants, self.table)
        self.assertAlmostEqual(outcome.phase, complex(math.cos(5 * self.constants.alpha_tilde),
                                                      math.sin(5 * self.constants.alpha_tilde)))

    def test_paths_agree(self):
        rng = random.Random(2024)
        scales = [OMScale(rng.randint(0, 10 ** 6), rng.randint(1, 64)) for _ in range(1000)]
        for key, zeta in collapse_batch(scales, 'both', self.constants, self.table):
            self.assertEqual(key.path, PATH_KEY)
            self.assertEqual(zeta.path, PATH_ZETA)
            self.assertEqual(key.k_star, zeta.k_star)
            self.assertEqual(key.phase, zeta.phase)
            self.assertEqual(key.rotation_trace, zeta.rotation_trace)

    def test_paths_agree_for_wide_bases(self):
        rng = random.Random(7)
        scales = [OMScale(rng.randint(0, 10 ** 7), rng.randint(65, 10 ** 4)) for _ in range(25)]
        for key, zeta in collapse_batch(scales, 'both', self.constants, self.table):
            self.assertEqual(key.k_star, zeta.k_star, key.scale)
            self.assertEqual(key.rotation_sum, zeta.rotation_sum, key.scale)

    def test_batch_independent_of_workers(self):
        scales = [OMScale(l1, 6) for l1 in range(0, 60, 7)]
        self.assertEqual(
            collapse_batch(scales, 'key', workers=1), collapse_batch(scales, 'key', workers=4))

    def test_unknown_path(self):
        with self.assertRaises(ValueError):
            collapse_batch([OMScale(1, 1)], 'sideways')

    def test_to_dict(self):
        data = zeta_stretch_collapse(OMScale(10, 8), self.constants, self.table).to_dict()
        self.assertEqual(data['k_star'], 5)
        self.assertEqual(data['path'], PATH_ZETA)
        self.assertIn('t_star', data['certificate'])
        self.assertIn('t_offset', data['certificate'])
        self.assertNotIn('certificate', key_cylinder_collapse(OMScale(10, 8)).to_dict())
