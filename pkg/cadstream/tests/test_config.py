# -*- coding: utf-8 -*-
"""
Unit tests for the configuration file parser (config.py).
"""
import os
import unittest

from cadstream.main.config import (GPS_ELL_DEFAULTS, Configuration, ConfigError,
                                   build_run_config)
from cadstream.main.ingest import WindowSpec


class TestConfiguration(unittest.TestCase):
    """Loading, validating and typing configuration files."""
    @classmethod
    def setUpClass(cls):
        cls.data_path = os.path.join(os.path.dirname(__file__), 'data')
        cls.example = os.path.join(os.path.dirname(__file__), '..', 'share',
                                   'cadstream.example.conf')

    def load(self, name):
        config = Configuration(os.path.join(self.data_path, name))
        config.load()
        config.validate()
        return config

    def test_defaults(self):
        """A missing default file leaves every option at its default."""
        config = Configuration(os.path.join(self.data_path, 'no-such.conf'))
        config.explicit = False
        config.load()
        config.validate()
        run = build_run_config(config)
        self.assertEqual(run.kind, 'access_log')
        self.assertEqual(run.window, WindowSpec(3600, 900))
        self.assertEqual(run.pipeline.threshold, 0.7)
        self.assertEqual(run.pipeline.algorithms, ('direct', 'rps', 'gps'))
        self.assertEqual(run.pipeline.gps.ell, GPS_ELL_DEFAULTS['access_log'])
        self.assertGreaterEqual(run.jobs, 1)
        self.assertFalse(run.incremental)

    def test_example_file(self):
        """The shipped example configuration validates."""
        config = Configuration(self.example)
        config.load()
        config.validate()
        self.assertEqual(build_run_config(config).pipeline.rps.p, 1.4)

    def test_file_values(self):
        """Values from the file reach the typed configuration."""
        run = build_run_config(self.load('test.conf'))
        self.assertEqual((run.seed, run.jobs, run.log_level), (7, 2, 3))
        self.assertEqual(run.kind, 'price_csv')
        self.assertEqual(run.window, WindowSpec(30, 3))
        self.assertEqual(run.pipeline.threshold, 0.65)
        self.assertEqual(run.pipeline.algorithms, ('rps', 'gps'))
        self.assertEqual(run.pipeline.gps.alpha, 0.8)
        self.assertEqual(run.pipeline.gps.ell, GPS_ELL_DEFAULTS['price_csv'])
        self.assertEqual(run.pipeline.rps.seed, 7)

    def test_bad_section(self):
        """Unknown sections are rejected."""
        with self.assertRaises(ConfigError):
            self.load('bad-section.conf')

    def test_bad_value(self):
        """Values of the wrong type are rejected."""
        with self.assertRaises(ConfigError):
            self.load('bad-value.conf')

    def test_unknown_option(self):
        """Unknown options are rejected."""
        config = Configuration(os.path.join(self.data_path, 'test.conf'))
        config.load()
        config.set('rps', 'temperature', '3')
        with self.assertRaises(ConfigError):
            config.validate()

    def test_invalid_settings(self):
        """Values outside their ranges are rejected."""
        for section, option, value in (('general', 'log_level', '4'),
                                       ('general', 'seed', '-1'),
                                       ('window', 'kind', 'syslog'),
                                       ('pipeline', 'algorithms', 'rps,lof'),
                                       ('pipeline', 'report', 'pretty')):
            config = self.load('test.conf')
            config.set(section, option, value)
            with self.assertRaises(ConfigError):
                config.validate()

    def test_detector_invariants(self):
        """Detector parameter ranges are checked when the run config is built."""
        config = self.load('test.conf')
        config.set('rps', 'ratio', '1.5')
        with self.assertRaises(ConfigError):
            build_run_config(config)
        config = self.load('test.conf')
        config.set('window', 'step', '40')
        with self.assertRaises(ConfigError):
            build_run_config(config)

    def test_missing_explicit_file(self):
        """An explicitly named configuration file must exist."""
        config = Configuration(os.path.join(self.data_path, 'no-such.conf'))
        with self.assertRaises(FileNotFoundError):
            config.load()


if __name__ == '__main__':
    unittest.main()
