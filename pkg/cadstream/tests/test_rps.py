# -*- coding: utf-8 -*-
"""
Unit tests for the randomized principal score (rps.py).
"""
import os
import unittest

import numpy as np
from scipy import stats

from cadstream.main.corrmat import build_correlation_matrix
from cadstream.main.errors import ConfigError, SamplingError
from cadstream.main.ingest import FeatureMatrix
from cadstream.main.pipeline import PipelineConfig, direct_detect
from cadstream.main.rps import (RpsConfig, anomaly_strength, column_norms, rps_detect,
                                sample_columns, sample_size, window_rng)
from cadstream.main.spectral import principal_score
from cadstream.main.synth import PlantedSpec, gen_planted_stream, truth_ids

FULL = os.environ.get('CADSTREAM_FULL_TESTS') == '1'


class TestRpsConfig(unittest.TestCase):
    """Parameter validation."""
    def test_defaults(self):
        """Defaults match the documented values."""
        config = RpsConfig()
        self.assertEqual((config.p, config.ratio, config.threshold), (1.4, 0.2, 0.7))
        self.assertEqual(config.scope, 'window')

    def test_invalid(self):
        """Out of range parameters raise ConfigError."""
        for kwargs in ({'p': 0.5}, {'ratio': 0.0}, {'ratio': 1.5}, {'threshold': 1.0},
                       {'seed': -1}, {'scope': 'everything'}, {'min_set_size': 0},
                       {'mode': 'signed'}):
            with self.assertRaises(ConfigError):
                RpsConfig(**kwargs)


class TestSampling(unittest.TestCase):
    """Norm-weighted column sampling."""
    def test_sample_size(self):
        """At least two draws, otherwise ceil(ratio * n)."""
        self.assertEqual(sample_size(10, 0.2), 2)
        self.assertEqual(sample_size(3, 0.1), 2)
        self.assertEqual(sample_size(100, 0.2), 20)
        self.assertEqual(sample_size(101, 0.2), 21)
        self.assertEqual(sample_size(50, 1.0), 50)

    def test_column_norms(self):
        """p-norms of the columns."""
        data = np.array([[3.0, 0.0], [4.0, -2.0]])
        np.testing.assert_allclose(column_norms(data, 1), [7.0, 2.0])
        np.testing.assert_allclose(column_norms(data, 2), [5.0, 2.0])

    def test_strength(self):
        """Strength is the set's share of the norm mass."""
        data = np.array([[1.0, 1.0, 2.0], [0.0, 0.0, 0.0]])
        self.assertAlmostEqual(anomaly_strength([2], data, 1), 0.5)
        self.assertAlmostEqual(anomaly_strength([0, 1, 2], data, 1), 1.0)
        self.assertEqual(anomaly_strength([], data, 1), 0.0)
        self.assertEqual(anomaly_strength([0], np.zeros((2, 2)), 1), 0.0)

    def test_all_zero_window(self):
        """A window without mass cannot be sampled."""
        with self.assertRaises(SamplingError):
            sample_columns(np.zeros((5, 4)), RpsConfig())
        with self.assertRaises(SamplingError):
            rps_detect(np.zeros((5, 4)), RpsConfig())

    def test_draw_frequencies(self):
        """Draw frequencies follow the column norms."""
        data = np.diag([1.0, 2.0, 3.0, 4.0, 10.0])
        config = RpsConfig(p=1.0, ratio=1.0)
        rng = np.random.default_rng(12)
        counts = np.zeros(5)
        for _ in range(2000):
            counts += np.bincount(sample_columns(data, config, rng), minlength=5)
        expected = counts.sum() * np.array([1.0, 2.0, 3.0, 4.0, 10.0]) / 20.0
        self.assertGreater(stats.chisquare(counts, expected).pvalue, 1e-4)

    def test_zero_columns_never_drawn(self):
        """Columns without mass have zero probability."""
        data = np.array([[1.0, 0.0, 2.0], [1.0, 0.0, 1.0]])
        draws = sample_columns(data, RpsConfig(ratio=1.0), np.random.default_rng(0))
        self.assertNotIn(1, draws)

    def test_seeded_by_window(self):
        """The generator depends on the seed and the window id only."""
        first = window_rng(7, 3).integers(0, 10 ** 9, 5)
        np.testing.assert_array_equal(first, window_rng(7, 3).integers(0, 10 ** 9, 5))
        self.assertFalse(np.array_equal(first, window_rng(7, 4).integers(0, 10 ** 9, 5)))


class TestRpsDetect(unittest.TestCase):
    """Detection on planted streams."""
    @classmethod
    def setUpClass(cls):
        spec = PlantedSpec(400, 40, mu=0.1, mu_tilde=0.85, M=60, strength=0.4)
        cls.window, cls.labels = gen_planted_stream(spec, seed=3, window_id=5)
        cls.truth = truth_ids(cls.window, cls.labels)

    def test_finds_planted_set(self):
        """A strong planted set is detected with a high score."""
        det = rps_detect(self.window, RpsConfig())
        self.assertEqual(det.algorithm, 'rps')
        self.assertEqual(det.window_id, 5)
        self.assertGreater(det.score, 0.7)
        found = set(det.anomalies)
        self.assertGreaterEqual(len(found & self.truth), 36)
        self.assertLessEqual(len(found - self.truth), 2)
        self.assertAlmostEqual(det.strength,
                               anomaly_strength(det.indices, self.window, 1.4))
        self.assertEqual(det.sample_size, 80)

    def test_sample_score(self):
        """The sample's own score is kept next to the score of the detected set."""
        config = RpsConfig()
        det = rps_detect(self.window, config)
        sample = np.unique(sample_columns(self.window, config, window_rng(0, 5)))
        expected = principal_score(build_correlation_matrix(self.window.data[:, sample])).rho
        self.assertAlmostEqual(det.sample_score, expected, places=5)
        detected = build_correlation_matrix(self.window.data[:, list(det.indices)])
        self.assertAlmostEqual(det.score, principal_score(detected).rho, places=5)

    def test_reproducible(self):
        """The same seed and window give the same detection."""
        self.assertEqual(rps_detect(self.window, RpsConfig(seed=4)),
                         rps_detect(self.window, RpsConfig(seed=4)))

    def test_sample_scope(self):
        """With scope 'sample' only drawn columns can be detected."""
        config = RpsConfig(scope='sample')
        det = rps_detect(self.window, config)
        drawn = set(sample_columns(self.window, config, window_rng(0, 5)).tolist())
        self.assertTrue(set(det.indices) <= drawn)

    def test_min_set_size(self):
        """Sets below the minimum size are reported empty with the sample score."""
        det = rps_detect(self.window, RpsConfig(min_set_size=1000))
        self.assertEqual(det.anomalies, ())
        self.assertEqual(det.score, det.sample_score)
        self.assertEqual(det.strength, 0.0)

    def test_noise_window(self):
        """Independent noise gives no detection and a low score."""
        window, _ = gen_planted_stream(PlantedSpec(200, 0, mu=0.1, M=60), seed=8)
        det = rps_detect(window, RpsConfig())
        self.assertEqual(det.anomalies, ())
        self.assertLess(det.score, 0.5)

    def test_degenerate_sample(self):
        """A single column with mass gives a degenerate zero score."""
        data = np.zeros((6, 5))
        data[:, 2] = np.arange(1.0, 7.0)
        X = FeatureMatrix(tuple('r%d' % i for i in range(6)), tuple('c%d' % j for j in range(5)),
                          data)
        det = rps_detect(X, RpsConfig())
        self.assertTrue(det.degenerate)
        self.assertEqual(det.score, 0.0)
        self.assertEqual(det.anomalies, ())

    def test_lift_over_direct_score(self):
        """
        In a wide window where the planted set is a small fraction of the
        columns but holds a good share of the mass, rPS scores high while the
        direct principal score stays near the background level.
        """
        trials = 20 if FULL else 3
        passed = 0
        for seed in range(trials):
            spec = PlantedSpec(2000, 100, mu=0.1, mu_tilde=0.85, M=60, strength=0.3)
            window, _ = gen_planted_stream(spec, seed=100 + seed, window_id=seed)
            det = rps_detect(window, RpsConfig())
            direct = direct_detect(window, build_correlation_matrix(window), PipelineConfig())
            self.assertLess(direct.score, 0.5)
            passed += det.score > 0.7
        self.assertGreaterEqual(passed, 0.8 * trials)


def mixed_sign_window(seed=0, M=60, size=10, noise=10):
    """
    Window of 'size' columns following a factor, 'size' columns following its
    negation and 'noise' independent columns.
    """
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((M, 1))
    data = np.hstack([factor + 0.3 * rng.standard_normal((M, size)),
                      -factor + 0.3 * rng.standard_normal((M, size)),
                      rng.standard_normal((M, noise))])
    cols = tuple('c%02d' % j for j in range(data.shape[1]))
    return FeatureMatrix(tuple('r%d' % i for i in range(M)), cols, data, window_id=2)


class TestMixedSignGroups(unittest.TestCase):
    """Groups mixing positive and negative correlation in absolute mode."""
    @classmethod
    def setUpClass(cls):
        cls.window = mixed_sign_window(seed=11)
        cls.block = set(cls.window.cols[:20])

    def test_rps_finds_both_signs(self):
        """rPS reports members of both polarities."""
        det = rps_detect(self.window, RpsConfig(ratio=1.0))
        found = set(det.anomalies)
        self.assertGreaterEqual(len(found & self.block), 18)
        self.assertLessEqual(len(found - self.block), 1)
        self.assertGreater(det.score, 0.7)

    def test_direct_finds_both_signs(self):
        """Direct membership scoring keeps negatively correlated members."""
        det = direct_detect(self.window, build_correlation_matrix(self.window),
                            PipelineConfig())
        found = set(det.anomalies)
        self.assertGreaterEqual(len(found & self.block), 18)
        self.assertLessEqual(len(found - self.block), 1)


if __name__ == '__main__':
    unittest.main()
