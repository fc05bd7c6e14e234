# -*- coding: utf-8 -*-
"""
Unit tests for the generative principal score (gps.py).
"""
import os
import unittest

import numpy as np

from cadstream.main.errors import ConfigError, DomainError
from cadstream.main.gps import (GpsConfig, GpsModel, LogCorrelations, brute_force_labels,
                                digamma, gps_fit, group_stats, initial_labels, initial_params,
                                inv_digamma, log_likelihood, project_params, prune_groups,
                                update_beta_params, update_labels)
from cadstream.main.ingest import FeatureMatrix
from cadstream.main.pipeline import PipelineConfig, run_window
from cadstream.main.rps import RpsConfig

FULL = os.environ.get('CADSTREAM_FULL_TESTS') == '1'


def beta_matrix(rng, n, block, inside=(18.0, 2.0), outside=(2.0, 8.0)):
    """
    Symmetric matrix of Beta draws: pairs inside 'block' use 'inside', all
    other pairs 'outside'. Unit diagonal.
    """
    members = np.zeros(n, dtype=bool)
    members[list(block)] = True
    P = rng.beta(*outside, size=(n, n))
    inner = rng.beta(*inside, size=(n, n))
    both = np.outer(members, members)
    P[both] = inner[both]
    P = np.triu(P, 1)
    P = P + P.T
    np.fill_diagonal(P, 1.0)
    return P


class TestDigamma(unittest.TestCase):
    """Digamma and its inverse."""
    def test_inverse(self):
        """inv_digamma(digamma(x)) recovers x."""
        for x in (0.5, 1.0, 5.0, 40.0):
            self.assertAlmostEqual(inv_digamma(digamma(x)), x, delta=1e-8 * x)
        values = np.array([0.01, 0.3, 2.5, 1000.0])
        np.testing.assert_allclose(inv_digamma(digamma(values)), values, rtol=1e-8)

    def test_domain(self):
        """Digamma is not evaluated at nonpositive arguments."""
        with self.assertRaises(DomainError):
            digamma(0.0)
        with self.assertRaises(DomainError):
            digamma(np.array([1.0, -2.0]))


class TestGpsConfig(unittest.TestCase):
    """Parameter validation and projection."""
    def test_invalid(self):
        """Out of range parameters raise ConfigError."""
        for kwargs in ({'ell': 0}, {'alpha': 0.5}, {'alpha': 1.0}, {'max_iter': 0},
                       {'eps': 0.0}, {'min_set_size': 0}):
            with self.assertRaises(ConfigError):
                GpsConfig(**kwargs)

    def test_projection(self):
        """Anomaly means are raised to alpha and background means capped at one half."""
        config = GpsConfig(alpha=0.8)
        a, b, capped = project_params(2.0, 2.0, True, config)
        self.assertAlmostEqual(a / (a + b), 0.8)
        self.assertFalse(capped)
        a, b, _ = project_params(6.0, 2.0, False, config)
        self.assertAlmostEqual(a / (a + b), 0.5)
        a, b, _ = project_params(0.2, 0.3, False, config)
        self.assertAlmostEqual(a + b, 1.0)
        a, b, capped = project_params(5e4, 1e3, True, config)
        self.assertTrue(capped)
        self.assertAlmostEqual(max(a, b), config.max_shape)


class TestLabelSweep(unittest.TestCase):
    """The compiled label sweep against the full likelihood."""
    def test_matches_brute_force(self):
        """Sequential updates pick the likelihood-maximizing label."""
        rng = np.random.default_rng(21)
        for trial in range(10):
            n = int(rng.integers(4, 13))
            P = beta_matrix(rng, n, range(n // 2))
            z = rng.integers(0, 3, n)
            model = GpsModel(np.array([8.0, 6.0, 2.0]), np.array([2.0, 3.0, 6.0]), z.copy())
            expected = brute_force_labels(P, model)
            labels, _ = update_labels(P, model)
            np.testing.assert_array_equal(labels, expected)

    def test_near_ties_go_to_background(self):
        """A group indistinguishable from the background loses in both sweeps."""
        rng = np.random.default_rng(26)
        P = beta_matrix(rng, 8, range(4))
        for nudge in (0.0, 1e-13, -1e-13):
            z = np.array([0, 0, 0, 0, 1, 1, 1, 1])
            model = GpsModel(np.array([3.0 * (1.0 + nudge), 3.0]), np.array([4.0, 4.0]), z)
            expected = brute_force_labels(P, model)
            labels, _ = update_labels(P, model)
            np.testing.assert_array_equal(expected, np.full(8, 1))
            np.testing.assert_array_equal(labels, expected)

    def test_changed_count(self):
        """The sweep reports how many labels moved."""
        rng = np.random.default_rng(22)
        P = beta_matrix(rng, 12, range(6))
        z = np.full(12, 1)
        z[:3] = 0
        model = GpsModel(np.array([18.0, 2.0]), np.array([2.0, 8.0]), z)
        _, changed = update_labels(P, model)
        self.assertGreater(changed, 0)
        _, changed = update_labels(P, model)
        self.assertEqual(changed, 0)


class TestBetaUpdate(unittest.TestCase):
    """Maximum likelihood Beta parameters."""
    def test_recovers_parameters(self):
        """Fitting 10^5 Beta(2, 5) draws recovers the parameters within 5%."""
        rng = np.random.default_rng(23)
        n = 448
        P = beta_matrix(rng, n, [], outside=(2.0, 5.0))
        self.assertGreaterEqual(n * (n - 1) // 2, 100000)
        config = GpsConfig(ell=1, inner_max_iter=2000, inner_tol=1e-12)
        logs = LogCorrelations(P, config.eps)
        model = GpsModel(np.array([5.0, 1.0]), np.array([1.0, 1.0]), np.full(n, 1))
        update_beta_params(model, group_stats(logs, model.z, 1), config)
        self.assertAlmostEqual(model.a[1], 2.0, delta=0.1)
        self.assertAlmostEqual(model.b[1], 5.0, delta=0.25)
        # the empty anomaly group keeps its parameters
        self.assertEqual((model.a[0], model.b[0]), (5.0, 1.0))


class TestGpsFit(unittest.TestCase):
    """Fitting and reporting."""
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(24)
        cls.n = 300
        cls.block = set(rng.permutation(cls.n)[:30].tolist())
        cls.P = beta_matrix(rng, cls.n, sorted(cls.block))

    def f1(self, found):
        found = set(found)
        hits = len(found & self.block)
        if not hits:
            return 0.0
        precision, recall = hits / float(len(found)), hits / float(len(self.block))
        return 2 * precision * recall / (precision + recall)

    def test_recovers_block(self):
        """The planted block is recovered without an initial set."""
        fit = gps_fit(self.P, GpsConfig(ell=2))
        self.assertTrue(fit.model.converged)
        self.assertEqual(len(fit.detections), 1)
        det = fit.detections[0]
        self.assertEqual(det.algorithm, 'gps')
        self.assertGreaterEqual(self.f1(det.indices), 0.9)
        self.assertGreater(det.score, 0.8)
        self.assertAlmostEqual(det.strength, len(det.indices) / 300.0)
        self.assertGreaterEqual(fit.model.loglik, fit.initial_loglik)

    def test_two_blocks(self):
        """With two groups both planted blocks are recovered."""
        rng = np.random.default_rng(28)
        order = rng.permutation(self.n)
        first, second = set(order[:30].tolist()), set(order[30:55].tolist())
        P = beta_matrix(rng, self.n, sorted(first))
        inner = beta_matrix(rng, self.n, sorted(second))
        both = np.zeros(self.n, dtype=bool)
        both[sorted(second)] = True
        mask = np.outer(both, both)
        P[mask] = inner[mask]
        fit = gps_fit(P, GpsConfig(ell=2))
        self.assertEqual(len(fit.detections), 2)
        found = [set(det.indices) for det in fit.detections]
        for block in (first, second):
            best = max(found, key=lambda members: len(members & block))
            self.assertGreaterEqual(len(best & block), len(block) - 2)
            self.assertLessEqual(len(best - block), 2)

    def test_seeded_with_initial_set(self):
        """A partial initial set grows to the block."""
        init = [sorted(self.block)[:10]]
        fit = gps_fit(self.P, GpsConfig(ell=1), init=init)
        self.assertGreaterEqual(self.f1(fit.detections[0].indices), 0.9)

    def test_loglik_nondecreasing(self):
        """Every parameter update and label sweep keeps or raises the likelihood."""
        config = GpsConfig(ell=2)
        logs = LogCorrelations(self.P, config.eps)
        z = initial_labels(self.P, config)
        a, b = initial_params(logs, z, config)
        model = GpsModel(a, b, z)
        previous = log_likelihood(logs, model)
        for _ in range(15):
            update_beta_params(model, group_stats(logs, model.z, config.ell), config)
            current = log_likelihood(logs, model)
            self.assertGreaterEqual(current, previous - 1e-9 * abs(previous))
            update_labels(logs, model)
            previous, current = current, log_likelihood(logs, model)
            self.assertGreaterEqual(current, previous - 1e-9 * abs(previous))
            previous = current

    def test_background_only(self):
        """A matrix without structure gives no detection."""
        P = beta_matrix(np.random.default_rng(25), 120, [])
        fit = gps_fit(P, GpsConfig(ell=2))
        self.assertEqual(fit.detections, [])

    def test_initial_labels(self):
        """Initial sets fill the first groups; seeds need a strong neighbor."""
        config = GpsConfig(ell=2)
        outside = [i for i in range(self.n) if i not in self.block][:3]
        z = initial_labels(self.P, config, init=[outside])
        self.assertTrue(np.all(z[outside] == 0))
        seeded = set(np.flatnonzero(z == 1).tolist())
        self.assertGreaterEqual(len(seeded & self.block), 25)



def core_fringe_window(seed, sigma, n=300, M=60, core=20, fringe=20, scale=4.0):
    """
    Window with a tight core (factor + 0.25 noise), a fringe loading the same
    factor with noise of scale sigma, and independent noise columns. Core and
    fringe columns are amplified so they hold most of the p-norm mass.
    """
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((M, 1))
    data = rng.standard_normal((M, n))
    data[:, :core] = scale * (factor + 0.25 * rng.standard_normal((M, core)))
    data[:, core:core + fringe] = scale * (factor + sigma * rng.standard_normal((M, fringe)))
    cols = tuple('c%03d' % j for j in range(n))
    return FeatureMatrix(tuple('r%d' % i for i in range(M)), cols, data, seed)


class TestPruneGroups(unittest.TestCase):
    """Members below alpha leave their group."""
    def test_fringe_removed(self):
        """Columns attached only moderately to a tight core go to the background."""
        P = np.full((5, 5), 0.7)
        P[:3, :3] = 0.95
        P[3, 4] = P[4, 3] = 0.4
        np.fill_diagonal(P, 1.0)
        z = np.zeros(5, dtype=np.int64)
        self.assertEqual(prune_groups(P, z, 1, 0.75), 2)
        np.testing.assert_array_equal(z, [0, 0, 0, 1, 1])

    def test_tight_group_kept(self):
        """A group whose members all average above alpha is left alone."""
        P = beta_matrix(np.random.default_rng(27), 40, range(20))
        z = np.full(40, 2, dtype=np.int64)
        z[:20] = 0
        self.assertEqual(prune_groups(P, z, 2, 0.75), 0)
        self.assertTrue(np.all(z[:20] == 0))


class TestConservative(unittest.TestCase):
    """gPS reports no column rPS leaves out on core and fringe windows."""
    def check(self, sigma, seeds):
        config = PipelineConfig(algorithms=('rps', 'gps'), rps=RpsConfig(ratio=0.5))
        contained = 0
        for seed in seeds:
            window = core_fringe_window(seed, sigma)
            result = run_window(window, config)
            found_rps = set(result.detections['rps'][0].anomalies)
            found_gps = set()
            for det in result.detections['gps']:
                found_gps.update(det.anomalies)
            self.assertGreaterEqual(len(found_gps & set(window.cols[:20])), 15)
            if found_gps <= found_rps:
                contained += 1
        return contained

    def test_gps_within_rps(self):
        """gPS anomalies are a subset of rPS anomalies in at least 80% of windows."""
        seeds = range(20) if FULL else range(5)
        for sigma in ((0.8, 1.0, 1.2) if FULL else (1.0,)):
            contained = self.check(sigma, seeds)
            self.assertGreaterEqual(contained, 0.8 * len(seeds), "sigma %s" % sigma)


if __name__ == '__main__':
    unittest.main()
