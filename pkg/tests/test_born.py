import math
import unittest

import numpy as np

from omqm.born import (
    JitterModel, closed_form_width, coefficients, empirical_distribution, floor_width,
    gaussian_model, total_variation, window_uniformity)
from omqm.omcore import OMScale


class EmpiricalDistributionTestCase(unittest.TestCase):

    def test_matches_cell_model(self):
        scale = OMScale(100003, 8)
        jitter = JitterModel(sigma_l=3.0, rng_seed=20240101, samples=100000)
        distribution = empirical_distribution(scale, jitter)
        self.assertEqual(distribution.total, 100000)
        model = gaussian_model(scale, 3.0)
        self.assertLess(total_variation(distribution.probabilities, model.probabilities), 0.05)

    def test_wide_jitter_is_uniform(self):
        scale = OMScale(100000, 2)
        distribution = empirical_distribution(scale, JitterModel(1000.0, 7, samples=100000))
        self.assertLess(total_variation(distribution.probabilities, [0.5, 0.5]), 0.02)

    def test_deterministic_under_seed(self):
        scale = OMScale(5000, 8)
        jitter = JitterModel(3.0, 99, samples=20000, batch_size=3000)
        first = empirical_distribution(scale, jitter, workers=1)
        second = empirical_distribution(scale, jitter, workers=4)
        self.assertEqual(first.counts, second.counts)
        other = empirical_distribution(scale, JitterModel(3.0, 100, samples=20000, batch_size=3000))
        self.assertNotEqual(first.counts, other.counts)

    def test_too_few_samples(self):
        with self.assertRaises(ValueError):
            empirical_distribution(OMScale(10, 2), JitterModel(1.0, 1, samples=999))

    def test_jitter_validation(self):
        with self.assertRaises(ValueError):
            JitterModel(0.0, 1)
        with self.assertRaises(ValueError):
            JitterModel(1.0, -1)
        self.assertEqual(JitterModel(1.0, 1, samples=25, batch_size=10).batch_sizes, [10, 10, 5])


class GaussianModelTestCase(unittest.TestCase):

    def test_normalised(self):
        for centering in ('cell', 'circle'):
            model = gaussian_model(OMScale(1001, 8), 3.0, centering)
            self.assertAlmostEqual(sum(model.probabilities), 1.0)
            self.assertEqual(model.width, 1.5)

    def test_circle_peaks_at_k_star(self):
        scale = OMScale(1001, 8)
        model = gaussian_model(scale, 3.0, 'circle')
        self.assertEqual(int(np.argmax(model.probabilities)), scale.k_star)

    def test_clamp_at_zero(self):
        # Jitter around l1 = 0 is clamped, so k = 0 collects the negative half
        model = gaussian_model(OMScale(0, 8), 1.0)
        self.assertGreater(model.probabilities[0], 0.5)

    def test_small_jitter_is_deterministic(self):
        scale = OMScale(1001, 8)
        distribution = empirical_distribution(scale, JitterModel(1e-6, 3, samples=5000))
        self.assertEqual(distribution.counts[scale.k_star], 5000)
        for centering in ('cell', 'circle'):
            model = gaussian_model(scale, 1e-6, centering)
            self.assertAlmostEqual(model.probabilities[scale.k_star], 1.0, places=12)

    def test_circle_is_symmetric_about_k_star(self):
        scale = OMScale(1001, 9)
        probabilities = gaussian_model(scale, 3.0, 'circle').probabilities
        for d in range(1, 5):
            self.assertAlmostEqual(
                probabilities[(scale.k_star + d) % 9], probabilities[(scale.k_star - d) % 9], places=12)

    def test_wide_jitter_model_is_half(self):
        for centering in ('cell', 'circle'):
            model = gaussian_model(OMScale(10 ** 6, 2), 1000.0, centering)
            for p in model.probabilities:
                self.assertAlmostEqual(p, 0.5, delta=1e-3)
        # Near l1 = 0 the clamped mass lands on k = 0
        clamped = gaussian_model(OMScale(5, 2), 1000.0)
        self.assertAlmostEqual(clamped.probabilities[0], 0.749, delta=0.005)

    def test_unknown_centering(self):
        with self.assertRaises(ValueError):
            gaussian_model(OMScale(10, 2), 1.0, 'square')
        with self.assertRaises(ValueError):
            gaussian_model(OMScale(10, 2), 0.0)

    def test_floor_width(self):
        self.assertEqual(floor_width(100, 3), 3)
        self.assertEqual(floor_width(100, 0.1), 1)


class CoefficientTestCase(unittest.TestCase):

    def test_closed_width(self):
        # sqrt(A + B) / (pi sqrt 2) with A = pi^4/15, B = 2 pi^6/189
        self.assertAlmostEqual(closed_form_width(), 0.918900, places=5)

    def test_closed_form_neighbour(self):
        table = coefficients(OMScale(6, 4))
        self.assertEqual(table.k_star, 3)
        self.assertEqual(table.closed_form[3], 1.0)
        self.assertAlmostEqual(table.closed_form[2], 0.553136, places=5)
        self.assertAlmostEqual(table.sigma_l, 2 * closed_form_width())
        self.assertEqual(len(table.rows()), 4)

    def test_closed_form_decreases_away_from_k_star(self):
        table = coefficients(OMScale(17, 16))
        k_star = table.k_star
        self.assertEqual(k_star, 8)
        closed = table.closed_form
        for d in range(1, 8):
            self.assertLess(closed[k_star + d], closed[k_star + d - 1])
            self.assertLess(closed[k_star - d], closed[k_star - d + 1])
            self.assertAlmostEqual(closed[k_star + d], closed[k_star - d])
        self.assertGreater(closed[0], 0.0)


class WindowUniformityTestCase(unittest.TestCase):

    def test_whole_periods_are_uniform(self):
        report = window_uniformity(4, 0, 80)
        self.assertEqual(report.counts, (20, 20, 20, 20))
        self.assertEqual(report.total_variation, 0.0)
        self.assertEqual(report.chi_square, 0.0)

    def test_partial_window(self):
        report = window_uniformity(2, 0, 3)
        self.assertEqual(report.counts, (2, 1))
        self.assertAlmostEqual(report.total_variation, 1 / 6)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            window_uniformity(2, 0, 0)
        with self.assertRaises(ValueError):
            total_variation([0.5, 0.5], [1.0])
        self.assertTrue(math.isclose(total_variation([1, 0], [0, 1]), 1.0))
