# -*- coding: utf-8 -*-
"""
Per-window detection pipeline.

For each window the enabled detectors run in the order direct PS, rPS, gPS
(gPS seeded with the rPS set). Each detection is gated into an alert or a
suppression; surviving detections are merged into one alert per window
(report mode 'merged') or reported one per algorithm (mode 'diagnostic').

Columns found by gPS are classed as core anomalies; columns found only by rPS
or direct PS are suspicious.
"""
import logging
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from cadstream.main.corrmat import MODES, build_correlation_matrix, recover_signs
from cadstream.main.errors import ConfigError, ThreadInterruptError
from cadstream.main.gps import GpsConfig, gps_fit
from cadstream.main.rps import Detection, RpsConfig, anomaly_strength, rps_detect
from cadstream.main.spectral import membership_scores, top_eigenpair
from cadstream.main.thread import ThreadPool

ALGORITHMS = ('direct', 'rps', 'gps')
REPORT_MODES = ('merged', 'diagnostic')
SUPPRESSION_REASONS = ('below_threshold', 'below_strength', 'empty_set')


@dataclass(frozen=True)
class PipelineConfig:
    """
    Pipeline parameters.

    Attributes:
        threshold (float): alert score threshold, strictly exceeded
        direct_threshold (float): threshold for direct PS; None means
            'threshold'
        strength_floor (float): minimum strength of an alert
        algorithms (tuple): enabled detectors, a subset of ALGORITHMS
        report (str): 'merged' or 'diagnostic'
        mode (str): correlation mode
        signs (bool): split alerts by correlation polarity
        rps (RpsConfig): rPS parameters (also supply p, the membership
            threshold and the minimum set size of direct PS)
        gps (GpsConfig): gPS parameters
    """
    threshold: float = 0.7
    direct_threshold: float = None
    strength_floor: float = 0.001
    algorithms: tuple = ALGORITHMS
    report: str = 'merged'
    mode: str = 'absolute'
    signs: bool = True
    rps: RpsConfig = field(default_factory=RpsConfig)
    gps: GpsConfig = field(default_factory=GpsConfig)

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ConfigError("Alert threshold must be in (0, 1), got %s." % self.threshold)
        if self.direct_threshold is not None and not 0 <= self.direct_threshold < 1:
            raise ConfigError("Direct PS threshold must be in [0, 1), got %s."
                              % self.direct_threshold)
        if not 0 <= self.strength_floor <= 1:
            raise ConfigError("Strength floor must be in [0, 1], got %s." % self.strength_floor)
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigError("Algorithms must be a nonempty subset of %s, got %s."
                              % (', '.join(ALGORITHMS), ', '.join(self.algorithms)))
        if self.report not in REPORT_MODES:
            raise ConfigError("Report mode must be one of %s, got '%s'."
                              % (', '.join(REPORT_MODES), self.report))
        if self.mode not in MODES:
            raise ConfigError("Unsupported correlation mode '%s'." % self.mode)

    def threshold_for(self, algorithm):
        if algorithm == 'direct' and self.direct_threshold is not None:
            return self.direct_threshold
        return self.threshold


@dataclass(frozen=True)
class Alert:
    """
    A reported anomaly.

    Attributes:
        window_id (int): window of the alert
        start (float): window start
        end (float): window end
        algorithm (str): detector name, '+'-joined when merged
        score (float): alert score, above the algorithm's threshold
        strength (float): strength of the alerted set
        anomalies (tuple): sorted identifiers of the alerted columns
        core (tuple): identifiers confirmed by gPS
        suspicious (tuple): identifiers found by rPS or direct PS only
        negatively_correlated (tuple): identifiers correlating negatively
            with the rest of the set
    """
    window_id: int
    start: float
    end: float
    algorithm: str
    score: float
    strength: float
    anomalies: tuple
    core: tuple = ()
    suspicious: tuple = ()
    negatively_correlated: tuple = ()

    def to_dict(self):
        return {'window_id': self.window_id, 'start': self.start, 'end': self.end,
                'algorithm': self.algorithm, 'score': self.score, 'strength': self.strength,
                'anomalies': list(self.anomalies), 'core': list(self.core),
                'suspicious': list(self.suspicious),
                'negatively_correlated': list(self.negatively_correlated)}


@dataclass(frozen=True)
class Suppressed:
    """A detection (or merged alert) that was not reported, with the reason."""
    reason: str
    detection: Detection


@dataclass(frozen=True)
class MergeResult:
    union: frozenset
    core: frozenset
    suspicious: frozenset


@dataclass
class PipelineResult:
    """
    Everything the pipeline produced for one window.

    Attributes:
        window_id (int): the window
        detections (dict): algorithm -> list of Detection
        alerts (list): Alert objects
        suppressed (collections.Counter): (algorithm, reason) -> count
        runtimes (dict): algorithm -> seconds, 'corrmat' for the matrix
        failures (dict): algorithm -> error message
    """
    window_id: int
    detections: dict = field(default_factory=dict)
    alerts: list = field(default_factory=list)
    suppressed: Counter = field(default_factory=Counter)
    runtimes: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def gate_alert(detection, config, window=None, merged=False):
    """
    Turn a detection into an alert, or a suppression carrying the first failed
    check: score not above the threshold, strength below the floor, empty set.

    With 'merged' the input is an already merged Alert. It is checked against
    the alert threshold whatever detectors contributed, so a direct PS
    threshold below it never lets a merged alert through on its own.

    Returns:
        Alert or Suppressed
    """
    threshold = config.threshold if merged else config.threshold_for(detection.algorithm)
    if not detection.score > threshold:
        return Suppressed('below_threshold', detection)
    if detection.strength < config.strength_floor:
        return Suppressed('below_strength', detection)
    if not detection.anomalies:
        return Suppressed('empty_set', detection)
    if merged:
        return detection

    start = window.start if window is not None else None
    end = window.end if window is not None else None
    if detection.algorithm == 'gps':
        core, suspicious = detection.anomalies, ()
    else:
        core, suspicious = (), detection.anomalies
    return Alert(detection.window_id, start, end, detection.algorithm, detection.score,
                 detection.strength, detection.anomalies, core, suspicious)


def merge_detections(rps_det, gps_dets, others=()):
    """
    Classify detected columns. gPS members are core (whether or not rPS found
    them too); rPS members not confirmed by gPS are suspicious, as are the
    members of any further detections in 'others'.

    Returns:
        MergeResult: union, core and suspicious identifier sets
    """
    found_rps = set(rps_det.anomalies) if rps_det is not None else set()
    found_gps = set()
    for det in gps_dets:
        found_gps.update(det.anomalies)
    found_other = set()
    for det in others:
        found_other.update(det.anomalies)

    union = found_rps | found_gps | found_other
    core = (found_rps & found_gps) | (found_gps - found_rps)
    return MergeResult(frozenset(union), frozenset(core), frozenset(union - core))


def direct_detect(X, P, config, window_id=None):
    """
    Direct principal score of the whole window, with membership scores
    against the window's principal series.

    Returns:
        Detection: with algorithm 'direct'
    """
    if window_id is None:
        window_id = X.window_id
    rps_config = config.rps
    eig = top_eigenpair(P, rps_config.tol, rps_config.max_iter, seed=window_id)
    scores, degenerate = membership_scores(X, eig)
    members = np.flatnonzero(scores > rps_config.threshold)
    if members.size < rps_config.min_set_size:
        members = np.empty(0, dtype=np.int64)
    return Detection(window_id, 'direct', eig.lambda1 / X.n,
                     tuple(sorted(X.cols[i] for i in members)),
                     anomaly_strength(members, X, rps_config.p), degenerate=degenerate,
                     indices=tuple(int(i) for i in members))


def _timed(result, name, func, *args, **kwargs):
    started = time.perf_counter()
    try:
        return func(*args, **kwargs)
    finally:
        result.runtimes[name] = result.runtimes.get(name, 0.0) + time.perf_counter() - started


def run_window(X, config, P=None, logger=None):
    """
    Run the enabled detectors on a window, then gate and merge.

    A detector that raises is logged and skipped; the others still run.

    Args:
        X (FeatureMatrix): the window
        config (PipelineConfig): parameters
        P (CorrelationMatrix): precomputed correlation matrix of X, if any

    Returns:
        PipelineResult
    """
    logger = logger or logging.getLogger('window-%s' % X.window_id)
    result = PipelineResult(X.window_id)
    algorithms = config.algorithms

    if P is None and ('direct' in algorithms or 'gps' in algorithms):
        try:
            P = _timed(result, 'corrmat', build_correlation_matrix, X, config.mode)
        except Exception as e:
            logger.error("%s exception: %s." % (type(e).__name__, e))
            result.failures['corrmat'] = str(e)

    if 'direct' in algorithms and P is not None:
        _run_detector(result, 'direct', logger, direct_detect, X, P, config)

    rps_det = None
    if 'rps' in algorithms:
        rps_det = _run_detector(result, 'rps', logger, rps_detect, X, config.rps)

    if 'gps' in algorithms and P is not None:
        init = [list(rps_det.indices)] if rps_det is not None and rps_det.indices else None
        fit = _run_detector(result, 'gps', logger, gps_fit, P, config.gps, init, X,
                            config.rps.p, X.window_id)
        if fit is not None:
            result.detections['gps'] = fit.detections

    passing = defaultdict(list)
    for algorithm in ALGORITHMS:
        for det in result.detections.get(algorithm, ()):
            gated = gate_alert(det, config, X)
            if isinstance(gated, Suppressed):
                result.suppressed[(algorithm, gated.reason)] += 1
            else:
                passing[algorithm].append(det)

    if passing:
        result.alerts = _build_alerts(X, passing, config, result)
    return result


def _run_detector(result, name, logger, func, *args):
    try:
        detection = _timed(result, name, func, *args)
    except Exception as e:
        logger.error("%s failed with %s exception: %s." % (name, type(e).__name__, e))
        result.failures[name] = "%s: %s" % (type(e).__name__, e)
        return None
    if isinstance(detection, Detection):
        result.detections[name] = [detection]
    return detection


def _negatives(X, ids, config):
    if not config.signs or config.mode != 'absolute' or len(ids) < 2:
        return ()
    return recover_signs(X, ids)[1]


def _build_alerts(X, passing, config, result):
    rps_pass = passing['rps'][0] if passing.get('rps') else None
    gps_pass = passing.get('gps', [])
    merged = merge_detections(rps_pass, gps_pass, passing.get('direct', []))
    index = X.column_index()

    if config.report == 'merged':
        names = [a for a in ALGORITHMS if passing.get(a)]
        union = tuple(sorted(merged.union))
        score = max(det.score for a in names for det in passing[a])
        strength = anomaly_strength([index[i] for i in union], X, config.rps.p)
        alert = Alert(X.window_id, X.start, X.end, '+'.join(names), score, strength, union,
                      tuple(sorted(merged.core)), tuple(sorted(merged.suspicious)),
                      _negatives(X, union, config))
        gated = gate_alert(alert, config, merged=True)
        if isinstance(gated, Suppressed):
            result.suppressed[('merged', gated.reason)] += 1
            return []
        return [gated]

    alerts = []
    for algorithm in ALGORITHMS:
        for det in passing.get(algorithm, ()):
            ids = set(det.anomalies)
            alerts.append(Alert(X.window_id, X.start, X.end, algorithm, det.score, det.strength,
                                det.anomalies, tuple(sorted(ids & merged.core)),
                                tuple(sorted(ids - merged.core)),
                                _negatives(X, det.anomalies, config)))
    return alerts


class RunSummary(object):
    """
    Aggregate counters over every processed window.

    Attributes:
        windows (int): windows processed
        alerts (collections.Counter): algorithm -> alert count
        suppressed (collections.Counter): 'algorithm:reason' -> count
        failures (collections.Counter): algorithm -> failure count
        runtimes (dict): algorithm -> list of per-window seconds
    """
    def __init__(self):
        self.windows = 0
        self.alerts = Counter()
        self.suppressed = Counter()
        self.failures = Counter()
        self.runtimes = defaultdict(list)

    def add(self, result):
        self.windows += 1
        for alert in result.alerts:
            self.alerts[alert.algorithm] += 1
        for (algorithm, reason), count in result.suppressed.items():
            self.suppressed['%s:%s' % (algorithm, reason)] += count
        for algorithm in result.failures:
            self.failures[algorithm] += 1
        for algorithm, seconds in result.runtimes.items():
            self.runtimes[algorithm].append(seconds)

    def to_dict(self):
        runtimes = {name: {'mean': float(np.mean(values)), 'max': float(np.max(values)),
                           'total': float(np.sum(values))}
                    for name, values in sorted(self.runtimes.items())}
        return {'windows': self.windows,
                'alerts': dict(sorted(self.alerts.items())),
                'alert_total': int(sum(self.alerts.values())),
                'suppressed': dict(sorted(self.suppressed.items())),
                'failures': dict(sorted(self.failures.items())),
                'runtime': runtimes}


class DetectionRunner(object):
    """
    Runs the pipeline over a window stream in batches on a thread pool and
    yields the per-window results in window order.

    Items of the stream are FeatureMatrix windows or (FeatureMatrix,
    CorrelationMatrix) pairs carrying a precomputed matrix.
    """
    def __init__(self, config, num_threads=1, batch_size=None):
        self.config = config
        self.num_threads = max(1, int(num_threads))
        self.batch_size = batch_size or 4 * self.num_threads
        self.summary = RunSummary()
        self.logger = logging.getLogger('runner')

    def run(self, windows):
        """
        Generate PipelineResult objects, one per window.

        Raises:
            ThreadInterruptError: an interrupt signal stopped processing
        """
        batch = []
        for item in windows:
            batch.append(item)
            if len(batch) >= self.batch_size:
                yield from self._run_batch(batch)
                batch = []
        if batch:
            yield from self._run_batch(batch)

    def _process(self, item, interrupt):
        if interrupt.is_set():
            raise ThreadInterruptError("Interrupted before processing window")
        if isinstance(item, tuple):
            X, P = item
        else:
            X, P = item, None
        return run_window(X, self.config, P)

    def _run_batch(self, batch):
        threads = min(self.num_threads, len(batch))
        with ThreadPool(batch, self._process, num_threads=threads) as pool:
            pool.execute_threads()
            results = pool.get_results()
            interrupted = pool.interrupt.is_set()

        for item, result in zip(batch, results):
            if result is None:
                if interrupted:
                    raise ThreadInterruptError("Window processing interrupted")
                X = item[0] if isinstance(item, tuple) else item
                self.logger.error("Window %s could not be processed." % X.window_id)
                self.summary.failures['window'] += 1
                continue
            self.summary.add(result)
            yield result
