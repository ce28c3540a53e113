import math
import unittest
from collections import Counter

import numpy as np

from omqm.omcore import (
    FEIGENBAUM_DELTA, FRACTAL_DIMENSION, ComplexPoint, OMConstants, OMScale, as_complex,
    collapse_index, collapse_indices, default_alpha_tilde, reduce_scale)


class ReduceScaleTestCase(unittest.TestCase):

    def test_reduce_scale(self):
        self.assertEqual(reduce_scale(7, 2), 3)
        self.assertEqual(reduce_scale(0, 5), 0)
        self.assertEqual(reduce_scale(21, 5), 1)

    def test_collapse_index_in_range(self):
        for n in range(1, 11):
            for l1 in range(0, 100):
                k = collapse_index(l1, n)
                self.assertTrue(0 <= k < n)

    def test_collapse_index_n1_always_zero(self):
        self.assertEqual({collapse_index(l1, 1) for l1 in range(50)}, {0})

    def test_collapse_index_is_periodic(self):
        for n in range(1, 13):
            for l1 in range(0, 120):
                self.assertEqual(collapse_index(l1 + 2 * n, n), collapse_index(l1, n), (l1, n))

    def test_full_period_hits_each_outcome_twice(self):
        for n in range(1, 13):
            for start in (0, 5, 1001):
                counts = Counter(collapse_index(l1, n) for l1 in range(start, start + 2 * n))
                self.assertEqual(counts, {k: 2 for k in range(n)}, (n, start))

    def test_collapse_indices_match_scalar(self):
        scales = np.arange(0, 500, dtype=np.int64)
        for n in (1, 2, 7, 64):
            expected = [collapse_index(int(l1), n) for l1 in scales]
            self.assertEqual(collapse_indices(scales, n).tolist(), expected)

    def test_collapse_indices_reject_bad_input(self):
        with self.assertRaises(TypeError):
            collapse_indices(np.array([1.5, 2.0]), 2)
        with self.assertRaises(ValueError):
            collapse_indices(np.array([3, -1]), 2)
        with self.assertRaises(ValueError):
            collapse_indices(np.array([3, 1]), 0)
        self.assertEqual(collapse_indices(np.array([], dtype=np.int64), 3).tolist(), [])

    def test_rejects_bad_input(self):
        with self.assertRaises(TypeError):
            reduce_scale(True, 2)
        with self.assertRaises(TypeError):
            reduce_scale(2.0, 2)
        with self.assertRaises(ValueError):
            reduce_scale(3, 0)
        with self.assertRaises(ValueError):
            reduce_scale(-1, 2)


class OMScaleTestCase(unittest.TestCase):

    def test_k_star(self):
        scale = OMScale(7, 2)
        self.assertEqual(scale.reduced, 3)
        self.assertEqual(scale.k_star, 1)

    def test_shifted(self):
        shifted = OMScale(100, 2).shifted(10)
        self.assertEqual(shifted.l1, 90)
        self.assertEqual(shifted.k_star, collapse_index(90, 2))

    def test_unknown_convention(self):
        with self.assertRaises(ValueError):
            OMScale(7, 2, convention='floor-n')

    def test_to_dict(self):
        self.assertEqual(OMScale(7, 2).to_dict(), {'l1': 7, 'n': 2, 'convention': 'mod-2n'})


class OMConstantsTestCase(unittest.TestCase):

    def test_quartic_sextic_constants(self):
        constants = OMConstants()
        # Known value: pi^4 / 15 and 2 pi^6 / 189
        self.assertAlmostEqual(constants.A, 6.493939402, places=8)
        self.assertAlmostEqual(constants.B, 10.173430619, places=8)

    def test_default_alpha(self):
        alpha = OMConstants().alpha_tilde
        self.assertAlmostEqual(alpha, default_alpha_tilde(FRACTAL_DIMENSION, FEIGENBAUM_DELTA))
        self.assertAlmostEqual(1 / alpha, 137.0, delta=0.01)

    def test_s_tilde_branches(self):
        self.assertEqual(OMConstants().s_tilde, complex(-1, 1))
        self.assertEqual(OMConstants(s_tilde_sign=-1).s_tilde, complex(1, -1))

    def test_fixed_constants(self):
        constants = OMConstants()
        self.assertAlmostEqual(constants.p0_tilde, 4 * math.pi ** 2)
        self.assertEqual(constants.c_tilde, -2j * math.pi)

    def test_validation(self):
        with self.assertRaises(ValueError):
            OMConstants(s_tilde_sign=0)
        with self.assertRaises(ValueError):
            OMConstants(alpha_tilde=-1.0)
        with self.assertRaises(ValueError):
            OMConstants(alpha_tilde=float('nan'))

    def test_from_settings(self):
        constants = OMConstants.from_settings({'s_tilde_sign': -1, 'alpha_tilde': None, 'D': 3.0, 'delta': 4.0})
        self.assertEqual(constants.s_tilde_sign, -1)
        self.assertAlmostEqual(constants.alpha_tilde, default_alpha_tilde(3.0, 4.0))
        self.assertEqual(OMConstants.from_settings({'alpha_tilde': 0.5}).alpha_tilde, 0.5)


class ComplexPointTestCase(unittest.TestCase):

    def test_value(self):
        self.assertEqual(ComplexPoint(1.0, 2.0).value, 1 + 2j)
        self.assertEqual(ComplexPoint.from_complex(3 - 1j), ComplexPoint(3.0, -1.0))
        self.assertEqual(as_complex(ComplexPoint(1.0, 2.0)), 1 + 2j)

    def test_not_finite(self):
        with self.assertRaises(ValueError):
            ComplexPoint(float('inf'), 0.0)
        with self.assertRaises(ValueError):
            as_complex(complex(float('nan'), 0))
