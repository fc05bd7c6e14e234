# -*- coding: utf-8 -*-
"""
Synthetic data for validating the detectors.

- gen_planted_matrix draws correlation matrices directly: a k x k anomaly
  block with Beta entries of mean mu_tilde inside a background of mean mu.
- gen_planted_stream draws data-vector windows from latent factors whose
  loadings are calibrated so that the mean absolute sample correlation hits
  the requested level.
- inject_anomalies appends a correlated column set of controlled strength to a
  real window; evaluate scores detections against the injected truth.
- gen_crawler_counts and render_access_log produce access log fixtures with a
  group of crawler hosts sharing a request profile.

Every generator takes an explicit seed and returns its ground truth.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from cadstream.main.corrmat import CorrelationMatrix
from cadstream.main.errors import CalibrationError, ContractError
from cadstream.main.ingest import FeatureMatrix
from cadstream.main.rps import column_norms
from cadstream.main.spectral import principal_score

# Beta concentration (a + b) used when no spread is given
DEFAULT_CONCENTRATION = 20.0

SCENARIOS = ('big_sets', 'strong_strength', 'hidden')

# (low, high) ranges per scenario: injected column fraction, or count for
# 'hidden', and target strength
SCENARIO_RANGES = {'big_sets': {'fraction': (0.2, 0.5), 'strength': (0.2, 0.6)},
                   'strong_strength': {'fraction': (0.05, 0.2), 'strength': (0.3, 0.7)},
                   'hidden': {'count': (20, 200), 'strength': (0.01, 0.09)}}

BISECTION_STEPS = 50
CALIBRATION_TOL = 0.03
HERMITE_NODES = 64

logger = logging.getLogger('synth')


@dataclass(frozen=True)
class PlantedSpec:
    """
    Parameters of a planted anomaly instance.

    Attributes:
        n (int): number of columns
        k (int): number of anomalous columns, 0 <= k <= n
        mu (float): background mean correlation
        sigma (float): background standard deviation; None uses the default
            concentration
        mu_tilde (float): anomaly mean correlation, above mu
        M (int): rows of a data-vector window
        strength (float): target strength of the anomaly set in data-vector
            mode; None leaves all columns at unit scale
        concentration (float): Beta concentration of anomaly entries
        p (float): norm order for strength
    """
    n: int
    k: int = 0
    mu: float = 0.5
    sigma: float = None
    mu_tilde: float = 0.85
    M: int = 60
    strength: float = None
    concentration: float = DEFAULT_CONCENTRATION
    p: float = 1.4

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.k <= self.n:
            raise ContractError("Planted instance needs n >= 1 and 0 <= k <= n, got n=%s, k=%s."
                                % (self.n, self.k))
        if not 0 <= self.mu <= 1 or not 0 <= self.mu_tilde <= 1:
            raise ContractError("Mean correlations must lie in [0, 1].")
        if self.k > 0 and not self.mu < self.mu_tilde:
            raise ContractError("Anomaly mean %s must exceed background mean %s."
                                % (self.mu_tilde, self.mu))
        if self.strength is not None and not 0 < self.strength < 1:
            raise ContractError("Target strength must be in (0, 1), got %s." % self.strength)


def beta_concentration(mean, sigma=None, default=DEFAULT_CONCENTRATION):
    """
    Concentration a + b of the Beta distribution with the given mean and
    standard deviation. Returns inf for a point mass (mean 0 or 1, or sigma 0).

    Raises:
        CalibrationError: no Beta distribution has these moments
    """
    if sigma is None:
        return math.inf if mean in (0.0, 1.0) else default
    if sigma == 0:
        return math.inf
    concentration = mean * (1.0 - mean) / (sigma * sigma) - 1.0
    if not concentration > 0:
        raise CalibrationError("No Beta distribution has mean %s and standard deviation %s."
                               % (mean, sigma))
    return concentration


def _beta_draws(rng, mean, concentration, size):
    if math.isinf(concentration) or mean in (0.0, 1.0):
        return np.full(size, float(mean))
    return rng.beta(mean * concentration, (1.0 - mean) * concentration, size)


def _planted_labels(rng, n, k):
    labels = np.zeros(n, dtype=bool)
    labels[rng.permutation(n)[:k]] = True
    return labels


def gen_planted_matrix(spec, seed=0):
    """
    Draw a planted correlation matrix: anomaly pairs ~ Beta with mean mu_tilde,
    every other pair ~ Beta with mean mu, unit diagonal.

    Returns:
        tuple: (CorrelationMatrix, boolean anomaly labels)

    Raises:
        CalibrationError: infeasible background (mu, sigma)
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    background = beta_concentration(spec.mu, spec.sigma)
    labels = _planted_labels(rng, n, spec.k)

    entries = np.zeros((n, n))
    for i in range(n - 1):
        row = _beta_draws(rng, spec.mu, background, n - i - 1)
        if labels[i]:
            mask = labels[i + 1:]
            count = int(mask.sum())
            if count:
                row[mask] = _beta_draws(rng, spec.mu_tilde, spec.concentration, count)
        entries[i, i + 1:] = row
        entries[i + 1:, i] = row
    np.fill_diagonal(entries, 1.0)
    return CorrelationMatrix(entries, 'absolute'), labels


def predicted_score(mu, mu_tilde, phi):
    """Large-n principal score approximation mu + (mu_tilde - mu) * phi^2."""
    return mu + (mu_tilde - mu) * phi * phi


def concentration_band(mu, mu_tilde, phi, n, width=5.0):
    """
    Interval predicted_score +- width / sqrt(n) holding the principal score
    of a planted n x n matrix with anomaly fraction phi.
    """
    half = width / np.sqrt(n)
    center = predicted_score(mu, mu_tilde, phi)
    return center - half, center + half


def parse_growth(rule):
    """
    Parse an anomaly count growth rule: 'n^m' (k grows as n to the power m) or
    'c*n' / 'cn' (k is a constant fraction c of n).

    Returns:
        tuple: ('power', m) or ('linear', c)

    Raises:
        ContractError: unrecognized rule
    """
    text = rule.replace(' ', '').lower()
    try:
        if text.startswith('n^'):
            return 'power', float(text[2:])
        if text.endswith('n'):
            return 'linear', float(text[:-1].rstrip('*'))
    except ValueError:
        pass
    raise ContractError("Unrecognized growth rule '%s', expected 'n^m' or 'c*n'." % rule)


def anomaly_count(rule, n, n0=200, initial_fraction=0.5):
    """
    Anomaly count at width n. Power rules start at initial_fraction * n0
    anomalies at width n0; counts are capped at n - 1.
    """
    kind, value = parse_growth(rule) if isinstance(rule, str) else rule
    if kind == 'power':
        k = initial_fraction * n0 * (n / float(n0)) ** value
    else:
        k = value * n
    return int(min(n - 1, max(0, round(k))))


def degeneration_curve(mu, mu_tilde, n_grid, rule='n^0.8', seeds=(0,), n0=200,
                       concentration=DEFAULT_CONCENTRATION):
    """
    Principal score of planted matrices along increasing widths.

    Returns:
        list: one dict per width with keys n, k, phi, rho, rho_std,
            predicted_rho, trials
    """
    rows = []
    for n in n_grid:
        k = anomaly_count(rule, n, n0)
        spec = PlantedSpec(n, k, mu, None, mu_tilde, concentration=concentration)
        scores = [principal_score(gen_planted_matrix(spec, _trial_seed(seed, n))[0]).rho
                  for seed in seeds]
        rows.append({'n': n, 'k': k, 'phi': k / float(n),
                     'rho': float(np.mean(scores)), 'rho_std': float(np.std(scores)),
                     'predicted_rho': predicted_score(mu, mu_tilde, k / float(n)),
                     'trials': len(scores)})
        logger.debug("Width %d: k=%d, mean score %.4f." % (n, k, rows[-1]['rho']))
    return rows


def concentration_check(mu, mu_tilde, phis, n, seeds=(0,)):
    """
    Principal scores of planted matrices at fixed width for several anomaly
    fractions, with the large-n band.

    Returns:
        list: one dict per (phi, seed) with keys phi, seed, rho, predicted,
            lower, upper, within
    """
    rows = []
    for phi in phis:
        low, high = concentration_band(mu, mu_tilde, phi, n)
        spec = PlantedSpec(n, int(round(phi * n)), mu, None, mu_tilde)
        for seed in seeds:
            rho = principal_score(gen_planted_matrix(spec, _trial_seed(seed, n))[0]).rho
            rows.append({'phi': phi, 'seed': seed, 'rho': rho,
                         'predicted': predicted_score(mu, mu_tilde, phi),
                         'lower': low, 'upper': high, 'within': bool(low <= rho <= high)})
    return rows


def _trial_seed(seed, n):
    return np.random.SeedSequence([int(seed), int(n)])


def expected_abs_correlation(rho, M):
    """
    E|r| of the sample correlation of M bivariate normal draws with population
    correlation rho, using Fisher's z ~ N(atanh(rho), 1 / (M - 3)) and
    Gauss-Hermite quadrature.
    """
    if M < 4:
        raise ContractError("Calibration needs at least 4 rows, got %s." % M)
    nodes, weights = hermegauss(HERMITE_NODES)
    z = np.arctanh(rho) + nodes / math.sqrt(M - 3.0)
    return float(np.sum(weights * np.abs(np.tanh(z))) / math.sqrt(2.0 * math.pi))


def calibrate_loading(target, M):
    """
    Population correlation whose expected absolute sample correlation over M
    rows equals 'target', found by bisection on [0, 0.9999]. Targets at or
    below the independent-noise level give 0.

    Raises:
        CalibrationError: the bisection misses the target by more than 0.03
    """
    null_level = expected_abs_correlation(0.0, M)
    if target <= null_level:
        return 0.0
    low, high = 0.0, 0.9999
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (low + high)
        if expected_abs_correlation(mid, M) < target:
            low = mid
        else:
            high = mid
    rho = 0.5 * (low + high)
    if abs(expected_abs_correlation(rho, M) - target) > CALIBRATION_TOL:
        raise CalibrationError("Cannot reach mean absolute correlation %s with %d rows."
                               % (target, M))
    return rho


def _standard_factor(rng, M):
    f = rng.standard_normal(M)
    return (f - f.mean()) / f.std()


def _factor_columns(rng, M, count, rho):
    loading = math.sqrt(rho)
    factor = _standard_factor(rng, M)
    noise = rng.standard_normal((M, count))
    return loading * factor[:, None] + math.sqrt(1.0 - rho) * noise


def _scale_to_strength(columns, others, target, p):
    mass_in = column_norms(columns, p).sum()
    mass_out = column_norms(others, p).sum()
    if mass_in <= 0 or mass_out <= 0:
        return None
    return columns * (target * mass_out / ((1.0 - target) * mass_in))


def gen_planted_stream(spec, seed=0, window_id=0):
    """
    Draw an M x n data-vector window with k planted anomalous columns.

    Anomalous columns load a shared factor; normal columns load a second
    factor with random signs when mu is above the independent-noise level, and
    are independent otherwise. Loadings are calibrated so the mean absolute
    sample correlation is about mu_tilde inside the set and mu among normal
    columns. With a target strength the anomalous columns are rescaled to hold
    that share of the p-norm mass.

    Returns:
        tuple: (FeatureMatrix, boolean anomaly labels)
    """
    rng = np.random.default_rng(seed)
    n, k, M = spec.n, spec.k, spec.M
    labels = _planted_labels(rng, n, k)
    data = np.empty((M, n))

    if k:
        rho_anomaly = calibrate_loading(spec.mu_tilde, M)
        data[:, labels] = _factor_columns(rng, M, k, rho_anomaly)
    normal = int(n - k)
    if normal:
        rho_normal = calibrate_loading(spec.mu, M)
        columns = _factor_columns(rng, M, normal, rho_normal)
        if rho_normal > 0:
            columns *= rng.choice([-1.0, 1.0], size=normal)
        data[:, ~labels] = columns

    if spec.strength is not None and 0 < k < n:
        scaled = _scale_to_strength(data[:, labels], data[:, ~labels], spec.strength, spec.p)
        if scaled is not None:
            data[:, labels] = scaled

    rows = tuple('r%04d' % i for i in range(M))
    cols = tuple('c%05d' % j for j in range(n))
    return FeatureMatrix(rows, cols, data, window_id), labels


def truth_ids(window, labels):
    """Column identifiers of the labeled columns."""
    return frozenset(c for c, flag in zip(window.cols, labels) if flag)


def _injected_count(rng, scenario, n):
    ranges = SCENARIO_RANGES[scenario]
    if 'count' in ranges:
        low, high = ranges['count']
        return int(rng.integers(low, high + 1))
    low, high = ranges['fraction']
    fraction = rng.uniform(low, high)
    return int(round(fraction * n / (1.0 - fraction)))


def inject_anomalies(window, scenario, seed=0, mu_tilde=0.85, p=1.4):
    """
    Append a correlated anomaly set to a real window.

    The scenario sets the number of injected columns and their strength:
    'big_sets' makes them 20-50% of the resulting columns at strength
    0.2-0.6, 'strong_strength' 5-20% at strength 0.3-0.7, and 'hidden' adds
    20-200 columns at strength below 0.1. Injected columns load a shared
    factor calibrated to mean absolute correlation mu_tilde; they are shifted
    to be nonnegative when the window is.

    Returns:
        tuple: (new FeatureMatrix, frozenset of injected identifiers), or None
            when the window is too small or has no mass

    Raises:
        ContractError: unknown scenario
    """
    if scenario not in SCENARIOS:
        raise ContractError("Unknown injection scenario '%s', expected one of %s."
                            % (scenario, ', '.join(SCENARIOS)))
    rng = np.random.default_rng(seed)
    n = window.n
    count = _injected_count(rng, scenario, n)
    low, high = SCENARIO_RANGES[scenario]['strength']
    strength = rng.uniform(low, high)

    if n < 2 or count < 2 or count > n:
        logger.warning("Window %s with %d columns is too small to inject %d '%s' columns."
                       % (window.window_id, n, count, scenario))
        return None

    columns = _factor_columns(rng, window.M, count, calibrate_loading(mu_tilde, window.M))
    if np.all(window.data >= 0):
        columns = columns - columns.min(axis=0)
    columns = _scale_to_strength(columns, window.data, strength, p)
    if columns is None:
        logger.warning("Window %s has no mass to measure strength against." % window.window_id)
        return None

    taken = set(window.cols)
    ids = []
    for j in range(count):
        name = 'inj-%04d' % j
        while name in taken:
            name += '_'
        ids.append(name)

    injected = FeatureMatrix(window.rows, window.cols + tuple(ids),
                             np.hstack([window.data, columns]),
                             window.window_id, window.start, window.end)
    return injected, frozenset(ids)


def clean_window(window, remove_ids):
    """Drop the given columns (e.g. known anomalies) from a window."""
    remove_ids = set(remove_ids)
    keep = [j for j, c in enumerate(window.cols) if c not in remove_ids]
    return window.select(keep)


@dataclass(frozen=True)
class EvalReport:
    """
    Micro-averaged detection metrics over a corpus.

    Attributes:
        recall (float): detected injected / injected, None without injections
        est_accuracy (float): detected injected / detected columns not known
            beforehand as suspicious, None when nothing was detected
        extra_alerts (int): alerts raised on control windows
        mean_runtime (float): mean detection seconds per window
        max_runtime (float): worst detection seconds per window
        windows (int): evaluated windows
    """
    recall: float
    est_accuracy: float
    extra_alerts: int = 0
    mean_runtime: float = None
    max_runtime: float = None
    windows: int = 0


def evaluate(detections, truth, suspicious=None, extra_alerts=0, runtimes=()):
    """
    Score detections against injected ground truth.

    Args:
        detections (dict): window key -> detected column identifiers
        truth (dict): window key -> injected column identifiers
        suspicious (dict): window key -> identifiers known as suspicious
            before injection; excluded from the accuracy denominator
        extra_alerts (int): alerts raised on control windows
        runtimes (iterable): per-window detection seconds

    Returns:
        EvalReport
    """
    hits = injected = counted = 0
    for key, planted in truth.items():
        found = set(detections.get(key, ()))
        known = set(suspicious.get(key, ())) if suspicious else set()
        hits += len(found & set(planted))
        injected += len(planted)
        counted += len(found - known)

    runtimes = list(runtimes)
    return EvalReport(hits / float(injected) if injected else None,
                      hits / float(counted) if counted else None,
                      int(extra_alerts),
                      float(np.mean(runtimes)) if runtimes else None,
                      float(np.max(runtimes)) if runtimes else None,
                      len(truth))


@dataclass
class Corpus:
    """
    Evaluation corpus: injected windows with their truth and the suspicious
    columns known before injection, plus control windows without injection.
    """
    windows: list = field(default_factory=list)
    truth: list = field(default_factory=list)
    suspicious: list = field(default_factory=list)
    scenarios: list = field(default_factory=list)
    controls: list = field(default_factory=list)


def build_corpus(n_windows=20, n_columns=300, M=60, controls=10, scenarios=SCENARIOS,
                 mu=0.1, seed=0):
    """
    Build a synthetic corpus: noise windows with background mean mu, each
    injected under a scenario (cycling through 'scenarios'), and 'controls'
    untouched noise windows.
    """
    corpus = Corpus()
    seeds = np.random.SeedSequence(seed).spawn(n_windows + controls)
    for i in range(n_windows):
        base_seed, inject_seed = seeds[i].generate_state(2)
        window, _ = gen_planted_stream(PlantedSpec(n_columns, 0, mu, M=M), int(base_seed), i)
        scenario = scenarios[i % len(scenarios)]
        injected = inject_anomalies(window, scenario, int(inject_seed))
        if injected is None:
            continue
        corpus.windows.append(injected[0])
        corpus.truth.append(injected[1])
        corpus.suspicious.append(frozenset())
        corpus.scenarios.append(scenario)
    for j in range(controls):
        base_seed = int(seeds[n_windows + j].generate_state(1)[0])
        window, _ = gen_planted_stream(PlantedSpec(n_columns, 0, mu, M=M), base_seed,
                                       n_windows + j)
        corpus.controls.append(window)
    return corpus


def _window_arrays(prefix, window):
    return {prefix + 'data': window.data, prefix + 'rows': np.array(window.rows, dtype=str),
            prefix + 'cols': np.array(window.cols, dtype=str),
            prefix + 'meta': np.array([window.window_id,
                                       np.nan if window.start is None else window.start,
                                       np.nan if window.end is None else window.end])}


def _window_from(arrays, prefix):
    window_id, start, end = arrays[prefix + 'meta']
    return FeatureMatrix(tuple(arrays[prefix + 'rows'].tolist()),
                         tuple(arrays[prefix + 'cols'].tolist()), arrays[prefix + 'data'],
                         int(window_id), None if np.isnan(start) else float(start),
                         None if np.isnan(end) else float(end))


def save_corpus(path, corpus):
    """
    Store a corpus as a compressed numpy archive. numpy appends '.npz' to
    paths lacking it; the path actually written is returned.
    """
    if not path.endswith('.npz'):
        path += '.npz'
    arrays = {'counts': np.array([len(corpus.windows), len(corpus.controls)]),
              'scenarios': np.array(corpus.scenarios, dtype=str)}
    for i, window in enumerate(corpus.windows):
        arrays.update(_window_arrays('w%d_' % i, window))
        arrays['w%d_truth' % i] = np.array(sorted(corpus.truth[i]), dtype=str)
        arrays['w%d_suspicious' % i] = np.array(sorted(corpus.suspicious[i]), dtype=str)
    for j, window in enumerate(corpus.controls):
        arrays.update(_window_arrays('c%d_' % j, window))
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.savez_compressed(path, **arrays)
    return path


def load_corpus(path):
    """
    Load a corpus written by save_corpus.

    Raises:
        OSError: the file is missing or unreadable
    """
    corpus = Corpus()
    with np.load(path, allow_pickle=False) as arrays:
        n_windows, n_controls = (int(v) for v in arrays['counts'])
        corpus.scenarios = arrays['scenarios'].tolist()
        for i in range(n_windows):
            corpus.windows.append(_window_from(arrays, 'w%d_' % i))
            corpus.truth.append(frozenset(arrays['w%d_truth' % i].tolist()))
            corpus.suspicious.append(frozenset(arrays['w%d_suspicious' % i].tolist()))
        for j in range(n_controls):
            corpus.controls.append(_window_from(arrays, 'c%d_' % j))
    return corpus


def gen_crawler_counts(n_users=40, n_crawlers=10, n_paths=60, rate=10.0, visits=5, seed=0):
    """
    Request count window of an access log with a crawler group: every crawler
    requests paths following one shared random profile, ordinary users hit a
    few random paths once or twice.

    Returns:
        tuple: (FeatureMatrix with integer counts, boolean crawler labels)
    """
    rng = np.random.default_rng(seed)
    n = n_users + n_crawlers
    labels = _planted_labels(rng, n, n_crawlers)
    counts = np.zeros((n_paths, n))
    profile = rng.exponential(1.0, n_paths)
    for j in range(n):
        if labels[j]:
            counts[:, j] = rng.poisson(rate * profile)
        else:
            paths = rng.choice(n_paths, size=min(visits, n_paths), replace=False)
            counts[paths, j] = rng.poisson(1.0, paths.size) + 1

    rows = tuple('/page/%03d.html' % i for i in range(n_paths))
    cols = tuple('10.0.%d.%d' % (j // 250, j % 250 + 1) for j in range(n))
    return FeatureMatrix(rows, cols, counts), labels


def render_access_log(window, path, start=1602288000, length=3600, seed=0):
    """
    Write a count window as combined-format access log records spread over
    [start, start + length), one record per request, in time order. The first
    and last seconds of the span are always used.

    Returns:
        int: number of records written
    """
    rng = np.random.default_rng(seed)
    requests = []
    for i, j in zip(*np.nonzero(window.data)):
        requests.extend([(window.cols[j], window.rows[i])] * int(window.data[i, j]))
    if not requests:
        open(path, 'w').close()
        return 0

    order = rng.permutation(len(requests))
    offsets = np.sort(rng.integers(0, length, len(requests)))
    offsets[0], offsets[-1] = 0, length - 1

    with open(path, 'w') as log_file:
        for offset, idx in zip(offsets, order):
            host, request_path = requests[idx]
            stamp = datetime.fromtimestamp(int(start + offset), tz=timezone.utc)
            log_file.write('%s - - [%s +0000] "GET %s HTTP/1.1" 200 %d "-" "Mozilla/5.0"\n'
                           % (host, stamp.strftime('%d/%b/%Y:%H:%M:%S'), request_path,
                              int(rng.integers(200, 5000))))
    return len(requests)
