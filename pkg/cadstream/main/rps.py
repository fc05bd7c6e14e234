# -*- coding: utf-8 -*-
"""
Randomized principal score (rPS).

Columns are drawn with replacement with probability proportional to their
p-norm, so a correlated set holding most of the window's mass dominates the
sample even when it is a small fraction of the columns. The principal score of
the sample's correlation matrix then no longer degenerates towards the
background correlation level as the window widens.

Membership is scored against the sample's principal series, either for every
column of the window (scope 'window') or only for the sampled columns (scope
'sample').
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from cadstream.main.corrmat import MODES, build_correlation_matrix
from cadstream.main.errors import ConfigError, SamplingError
from cadstream.main.ingest import FeatureMatrix
from cadstream.main.spectral import (principal_score, principal_series, score_against,
                                     top_eigenpair)

SCOPES = ('window', 'sample')

logger = logging.getLogger('rps')


@dataclass(frozen=True)
class RpsConfig:
    """
    rPS parameters.

    Attributes:
        p (float): norm order used for sampling weights and strength, >= 1
        ratio (float): sample size as a fraction of the column count, in (0, 1]
        threshold (float): membership score above which a column is anomalous
        seed (int): base seed, combined with the window id
        scope (str): 'window' or 'sample', the columns membership is scored for
        min_set_size (int): smaller detected sets are reported empty
        mode (str): correlation mode of the sample matrix
        tol (float): eigensolver tolerance
        max_iter (int): eigensolver iteration limit
    """
    p: float = 1.4
    ratio: float = 0.2
    threshold: float = 0.7
    seed: int = 0
    scope: str = 'window'
    min_set_size: int = 3
    mode: str = 'absolute'
    tol: float = 1e-6
    max_iter: int = 300

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError("rPS norm order p must be >= 1, got %s." % self.p)
        if not 0 < self.ratio <= 1:
            raise ConfigError("rPS sample ratio must be in (0, 1], got %s." % self.ratio)
        if not 0 <= self.threshold < 1:
            raise ConfigError("rPS membership threshold must be in [0, 1), got %s." % self.threshold)
        if self.seed < 0:
            raise ConfigError("Seed must be nonnegative, got %s." % self.seed)
        if self.scope not in SCOPES:
            raise ConfigError("rPS scope must be one of %s, got '%s'." % (', '.join(SCOPES), self.scope))
        if self.min_set_size < 1:
            raise ConfigError("Minimum set size must be positive, got %s." % self.min_set_size)
        if self.mode not in MODES:
            raise ConfigError("Unsupported correlation mode '%s'." % self.mode)


@dataclass(frozen=True)
class Detection:
    """
    Result of one detector on one window.

    Attributes:
        window_id (int): window the detection belongs to
        algorithm (str): 'direct', 'rps' or 'gps'
        score (float): principal score of the detected set, or of the
            window/sample when the set is empty
        anomalies (tuple): sorted identifiers of the detected columns
        strength (float): p-norm mass share of the detected columns
        sample_score (float): principal score of the rPS sample (rPS only)
        degenerate (bool): too few distinct columns or a constant principal
            series
        sample_size (int): number of draws (rPS only)
        indices (tuple): window column positions of the detected columns
    """
    window_id: int
    algorithm: str
    score: float
    anomalies: tuple = ()
    strength: float = 0.0
    sample_score: float = None
    degenerate: bool = False
    sample_size: int = 0
    indices: tuple = ()


def _data(X):
    if isinstance(X, FeatureMatrix):
        return X.data
    return np.asarray(X, dtype=np.float64)


def column_norms(X, p=1.4):
    """p-norm of every column of a window."""
    data = np.abs(_data(X))
    if p == 1:
        return data.sum(axis=0)
    return (data ** p).sum(axis=0) ** (1.0 / p)


def anomaly_strength(indices, X, p=1.4):
    """
    Share of the window's p-norm mass held by the given columns,
    sum_{i in A} ||x_i||_p / sum_i ||x_i||_p.

    Returns:
        float: strength in [0, 1]; 0 for an empty set or an all-zero window
    """
    indices = np.asarray(list(indices), dtype=np.int64)
    if indices.size == 0:
        return 0.0
    norms = column_norms(X, p)
    total = norms.sum()
    if total <= 0:
        return 0.0
    return float(min(1.0, norms[indices].sum() / total))


def sample_size(n, ratio):
    """Number of draws, max(2, ceil(ratio * n))."""
    return max(2, int(math.ceil(round(ratio * n, 9))))


def window_rng(seed, window_id):
    """Random generator derived from the base seed and the window id."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(window_id)]))


def sample_columns(X, config, rng=None, window_id=0):
    """
    Draw column positions with replacement, P(i) = ||x_i||_p / sum_j ||x_j||_p.

    Returns:
        numpy.ndarray: the drawn positions (a multiset)

    Raises:
        SamplingError: every column norm is zero
    """
    norms = column_norms(X, config.p)
    total = norms.sum()
    if not total > 0 or not np.isfinite(total):
        raise SamplingError("Window %s has no column mass to sample from." % window_id)
    if rng is None:
        rng = window_rng(config.seed, window_id)
    return rng.choice(norms.size, size=sample_size(norms.size, config.ratio),
                      replace=True, p=norms / total)


def _ids(X, indices):
    if isinstance(X, FeatureMatrix):
        return tuple(sorted(X.cols[i] for i in indices))
    return tuple(sorted(int(i) for i in indices))


def rps_detect(X, config, window_id=None):
    """
    Run rPS on a window.

    The sample's principal series scores columns for membership; columns
    scoring above the threshold form the detected set, which is reported
    empty when smaller than 'min_set_size'. The detection score is the
    principal score of the detected set over the whole window (the sample
    score when the set is empty). Strength is measured over the whole window.

    Args:
        X (FeatureMatrix): the window
        config (RpsConfig): parameters
        window_id (int): overrides X.window_id for seeding

    Returns:
        Detection: with algorithm 'rps'

    Raises:
        SamplingError: the window has no nonzero column
    """
    data = _data(X)
    if window_id is None:
        window_id = X.window_id if isinstance(X, FeatureMatrix) else 0

    draws = sample_columns(X, config, window_rng(config.seed, window_id), window_id)
    sample = np.unique(draws)
    if sample.size < 2:
        logger.debug("Window %s: rPS sample has fewer than 2 distinct columns." % window_id)
        return Detection(window_id, 'rps', 0.0, degenerate=True, sample_score=0.0,
                         sample_size=draws.size)

    sub = data[:, sample]
    P_sample = build_correlation_matrix(sub, config.mode)
    eig = top_eigenpair(P_sample, config.tol, config.max_iter, seed=window_id)
    sample_score = eig.lambda1 / sample.size
    t = principal_series(sub, eig)

    if config.scope == 'window':
        scores, degenerate = score_against(data, t)
        candidates = np.flatnonzero(scores > config.threshold)
    else:
        scores, degenerate = score_against(sub, t)
        candidates = sample[np.flatnonzero(scores > config.threshold)]

    if candidates.size < config.min_set_size:
        candidates = np.empty(0, dtype=np.int64)
        score = sample_score
    else:
        P_set = build_correlation_matrix(data[:, candidates], config.mode)
        score = principal_score(P_set, config.tol, config.max_iter, seed=window_id).rho

    return Detection(window_id, 'rps', float(score), _ids(X, candidates),
                     anomaly_strength(candidates, data, config.p), float(sample_score),
                     degenerate, int(draws.size), tuple(int(i) for i in candidates))
