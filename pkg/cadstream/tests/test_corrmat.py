# -*- coding: utf-8 -*-
"""
Unit tests for correlation matrices (corrmat.py), including the incremental
sliding window update.
"""
import unittest

import numpy as np

from cadstream.main.corrmat import (PairStats, build_correlation_matrix, pearson,
                                    recover_signs, update_correlation_incremental)
from cadstream.main.errors import ConfigError, ContractError
from cadstream.main.ingest import FeatureMatrix


def window(data, first_row=0, cols=None, window_id=0):
    """FeatureMatrix with rows named by their absolute position."""
    data = np.asarray(data, dtype=float)
    rows = tuple('t%03d' % (first_row + i) for i in range(data.shape[0]))
    cols = cols or tuple('c%02d' % j for j in range(data.shape[1]))
    return FeatureMatrix(rows, cols, data, window_id)


class TestPearson(unittest.TestCase):
    """Pairwise Pearson correlation."""
    def test_known_values(self):
        """Perfect, anti and zero correlation."""
        x = [1.0, 2.0, 3.0, 4.0]
        self.assertAlmostEqual(pearson(x, [2.0, 4.0, 6.0, 8.0]), 1.0, places=12)
        self.assertAlmostEqual(pearson(x, [4.0, 3.0, 2.0, 1.0]), -1.0, places=12)
        self.assertAlmostEqual(pearson([1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]), 0.0,
                               places=12)

    def test_constant_vector(self):
        """A constant vector correlates 0 with anything."""
        self.assertEqual(pearson([3.0, 3.0, 3.0], [1.0, 2.0, 5.0]), 0.0)
        self.assertEqual(pearson([0.0, 0.0], [1.0, 2.0]), 0.0)

    def test_scale_invariance(self):
        """Rescaling by a power of two leaves the result bit-identical."""
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal(50), rng.standard_normal(50)
        self.assertEqual(pearson(x, y), pearson(8.0 * x, y))
        self.assertEqual(pearson(x, y), pearson(x, 0.25 * y))

    def test_contract(self):
        """Length mismatch and too short vectors are rejected."""
        with self.assertRaises(ContractError):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])
        with self.assertRaises(ContractError):
            pearson([1.0], [2.0])


class TestCorrelationMatrix(unittest.TestCase):
    """Full correlation matrices."""
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(11)
        cls.data = rng.standard_normal((40, 12))
        cls.data[:, 3] = -2.0 * cls.data[:, 0] + 0.1 * rng.standard_normal(40)
        cls.data[:, 7] = 5.0

    def test_invariants(self):
        """Symmetric, unit diagonal, entries in [0, 1] in every mode."""
        for mode in ('absolute', 'positive_only', 'negative_only'):
            P = build_correlation_matrix(self.data, mode)
            P.check()
            self.assertEqual(P.n, 12)

    def test_matches_pearson(self):
        """Entries equal pairwise Pearson correlations."""
        P = build_correlation_matrix(self.data).entries
        for i, j in ((0, 1), (0, 3), (2, 9), (7, 4)):
            self.assertAlmostEqual(P[i, j], abs(pearson(self.data[:, i], self.data[:, j])),
                                   places=10)

    def test_modes(self):
        """Sign filtering keeps one polarity."""
        pos = build_correlation_matrix(self.data, 'positive_only').entries
        neg = build_correlation_matrix(self.data, 'negative_only').entries
        self.assertEqual(pos[0, 3], 0.0)
        self.assertGreater(neg[0, 3], 0.9)
        self.assertEqual(neg[7, 0], 0.0)
        with self.assertRaises(ConfigError):
            build_correlation_matrix(self.data, 'signed')

    def test_too_few_rows(self):
        """A single row has no correlation."""
        with self.assertRaises(ContractError):
            build_correlation_matrix(np.ones((1, 3)))

    def test_submatrix_and_ids(self):
        """Column identifiers follow the window."""
        X = window(self.data)
        P = build_correlation_matrix(X)
        self.assertEqual(P.col_ids, X.cols)
        self.assertEqual(P.submatrix([0, 3]).shape, (2, 2))

    def test_recover_signs(self):
        """An anti-correlated member is split off."""
        X = window(self.data)
        same, opposite = recover_signs(X, ['c00', 'c03'])
        self.assertEqual(len(same) + len(opposite), 2)
        self.assertEqual(len(opposite), 1)
        self.assertEqual(recover_signs(X, ['c05']), (('c05',), ()))


class TestIncremental(unittest.TestCase):
    """Incremental sliding updates against full recomputation."""
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(5)
        factor = rng.standard_normal((80, 1))
        cls.stream = 100.0 + factor @ rng.uniform(0.2, 1.0, (1, 15)) \
            + rng.standard_normal((80, 15))

    def assert_matches(self, P, X):
        fresh = build_correlation_matrix(X)
        self.assertEqual(P.col_ids, fresh.col_ids)
        np.testing.assert_allclose(P.entries, fresh.entries, rtol=1e-10, atol=1e-10)

    def test_slide_sequence(self):
        """Sliding by a few rows matches recomputation without fallbacks."""
        stats = PairStats(window(self.stream[0:30]))
        for start in range(3, 40, 3):
            X = window(self.stream[start:start + 30], first_row=start)
            P, fell_back = stats.slide_to(X)
            self.assertFalse(fell_back)
            self.assert_matches(P, X)
        self.assertEqual(stats.fallbacks, 0)

    def test_random_slides(self):
        """One hundred random slides over 50 columns match recomputation."""
        rng = np.random.default_rng(6)
        factor = rng.standard_normal((700, 1))
        stream = 100.0 + factor @ rng.uniform(0.2, 1.0, (1, 50)) \
            + rng.standard_normal((700, 50))
        start, length = 0, 40
        stats = PairStats(window(stream[0:length]))
        for _ in range(100):
            start += int(rng.integers(1, 6))
            length = int(rng.integers(30, 51))
            X = window(stream[start:start + length], first_row=start)
            P, fell_back = stats.slide_to(X)
            self.assertFalse(fell_back)
            fresh = build_correlation_matrix(X)
            np.testing.assert_allclose(P.entries, fresh.entries, rtol=1e-10, atol=1e-10)
        self.assertEqual(stats.fallbacks, 0)

    def test_update_function(self):
        """Explicit departing and arriving rows."""
        X0 = window(self.stream[0:30])
        stats = PairStats(X0)
        arriving = window(self.stream[30:35], first_row=30)
        P, fell_back = update_correlation_incremental(stats, X0.rows[:5], arriving)
        self.assertFalse(fell_back)
        self.assert_matches(P, window(self.stream[5:35], first_row=5))

    def test_column_changes(self):
        """Vanished columns are dropped and new columns computed fresh."""
        cols = tuple('c%02d' % j for j in range(15))
        stats = PairStats(window(self.stream[0:30, :12], cols=cols[:12]))
        X = window(self.stream[3:33, 2:], first_row=3, cols=cols[2:])
        P, fell_back = stats.slide_to(X)
        self.assertFalse(fell_back)
        self.assert_matches(P, X)

    def test_fallback_on_changed_rows(self):
        """Rewritten history forces a full recomputation."""
        stats = PairStats(window(self.stream[0:30]))
        changed = self.stream[3:33].copy()
        changed[0, 0] += 1.0
        X = window(changed, first_row=3)
        P, fell_back = stats.slide_to(X)
        self.assertTrue(fell_back)
        self.assertEqual(stats.fallbacks, 1)
        self.assert_matches(P, X)

    def test_fallback_on_unknown_departure(self):
        """Departing rows that were never buffered force a recomputation."""
        stats = PairStats(window(self.stream[0:30]))
        arriving = window(self.stream[30:32], first_row=30)
        P, fell_back = update_correlation_incremental(stats, ['t999'], arriving)
        self.assertTrue(fell_back)
        self.assert_matches(P, window(self.stream[0:32]))

    def test_untracked_arriving_columns(self):
        """Arriving rows may not introduce columns."""
        stats = PairStats(window(self.stream[0:30, :5]))
        arriving = window(self.stream[30:32, :6], first_row=30)
        with self.assertRaises(ContractError):
            update_correlation_incremental(stats, [], arriving)

    def test_constant_column(self):
        """A column turning constant correlates 0."""
        data = self.stream[0:30].copy()
        data[:, 4] = 7.0
        P = PairStats(window(data)).correlation()
        self.assertTrue(np.all(P.entries[4, np.arange(15) != 4] == 0.0))
        self.assertEqual(P.entries[4, 4], 1.0)


if __name__ == '__main__':
    unittest.main()
