# -*- coding: utf-8 -*-
"""
Numerical experiment drivers.

Each driver runs one experiment over synthetic data, writes its table as CSV
(with the provenance header) into an output directory and returns the rows:

- degeneration: principal score of planted matrices along growing widths
- concentration: principal scores against their large-n band
- injection: recall, estimated accuracy and runtime per scenario and algorithm
- scaling: runtime and recall as windows widen, plus gPS sweep timings
- sweep: one-at-a-time parameter sweep over an injection corpus
"""
import logging
import os
import time
from dataclasses import replace

import numpy as np

from cadstream.main.errors import ConfigError
from cadstream.main.gps import (GpsConfig, GpsModel, LogCorrelations, initial_labels,
                                initial_params, update_labels)
from cadstream.main.ingest import FeatureMatrix
from cadstream.main.pipeline import ALGORITHMS, run_window
from cadstream.main.provenance import write_csv
from cadstream.main import synth

EXPERIMENTS = ('degeneration', 'concentration', 'injection', 'scaling')

DEFAULT_GRID = (('ratio', (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)),
                ('p', (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)),
                ('alpha', (0.6, 0.65, 0.7, 0.75, 0.8, 0.85)),
                ('ell', (1, 2, 3, 4, 5, 6)))

# grid parameter -> (sub-config, field, type)
GRID_PARAMETERS = {'ratio': ('rps', 'ratio', float),
                   'p': ('rps', 'p', float),
                   'alpha': ('gps', 'alpha', float),
                   'ell': ('gps', 'ell', int)}

logger = logging.getLogger('experiments')


def parse_grid(text):
    """
    Parse a grid such as 'p=1,1.4;ratio=0.1,0.2'.

    Returns:
        tuple: ((parameter, values), ...)

    Raises:
        ConfigError: empty grid, unknown parameter or bad value
    """
    grid = []
    for part in (text or '').split(';'):
        if not part.strip():
            continue
        name, _, values = part.partition('=')
        name = name.strip()
        if name not in GRID_PARAMETERS:
            raise ConfigError("Unknown grid parameter '%s', expected one of %s."
                              % (name, ', '.join(GRID_PARAMETERS)))
        cast = GRID_PARAMETERS[name][2]
        try:
            parsed = tuple(cast(v) for v in values.split(',') if v.strip())
        except ValueError:
            raise ConfigError("Grid parameter '%s' has a non-numeric value." % name)
        if parsed:
            grid.append((name, parsed))
    if not grid:
        raise ConfigError("Parameter grid is empty.")
    return tuple(grid)


def with_param(config, name, value):
    """Copy of a PipelineConfig with one rPS/gPS parameter changed."""
    section, attribute, cast = GRID_PARAMETERS[name]
    sub = replace(getattr(config, section), **{attribute: cast(value)})
    return replace(config, **{section: sub})


def run_degeneration(out_dir, meta=None, mu=0.5, mu_tilde=0.85, rule='n^0.8',
                     n_grid=(200, 500, 1000, 2000, 4000, 8000), trials=3, seed=0):
    """Degeneration curve of the principal score; writes degeneration.csv."""
    seeds = [seed + t for t in range(trials)]
    rows = synth.degeneration_curve(mu, mu_tilde, n_grid, rule, seeds)
    write_csv(os.path.join(out_dir, 'degeneration.csv'),
              ['n', 'k', 'phi', 'rho', 'rho_std', 'predicted_rho', 'trials'], rows, meta)
    return rows


def run_concentration(out_dir, meta=None, mu=0.3, mu_tilde=0.85, phis=(0.3, 0.5, 0.7),
                      n=2000, trials=20, seed=0):
    """Principal scores against their band; writes concentration.csv."""
    rows = synth.concentration_check(mu, mu_tilde, phis, n, [seed + t for t in range(trials)])
    write_csv(os.path.join(out_dir, 'concentration.csv'),
              ['phi', 'seed', 'rho', 'predicted', 'lower', 'upper', 'within'], rows, meta)
    return rows


def evaluate_corpus(corpus, config, algorithms=None):
    """
    Run the pipeline over a corpus and score the alerts against the injected
    truth.

    Args:
        corpus (synth.Corpus): injected and control windows
        config (PipelineConfig): pipeline parameters
        algorithms (tuple): overrides config.algorithms

    Returns:
        synth.EvalReport
    """
    if algorithms is not None:
        config = replace(config, algorithms=tuple(algorithms))
    detections, truth, suspicious, runtimes = {}, {}, {}, []
    for i, window in enumerate(corpus.windows):
        result = run_window(window, config)
        found = set()
        for alert in result.alerts:
            found.update(alert.anomalies)
        detections[i] = found
        truth[i] = corpus.truth[i]
        suspicious[i] = corpus.suspicious[i]
        runtimes.append(sum(result.runtimes.values()))

    extra = sum(len(run_window(window, config).alerts) for window in corpus.controls)
    return synth.evaluate(detections, truth, suspicious, extra, runtimes)


def run_injection(out_dir, config, meta=None, scenarios=synth.SCENARIOS, windows=12,
                  n_columns=300, M=60, controls=6, mu=0.1, seed=0, corpus_path=None):
    """
    Injection experiment: recall, estimated accuracy and runtime per scenario
    and algorithm (each detector alone, then all merged); writes eval.csv.
    """
    rows = []
    full = synth.Corpus()
    for s, scenario in enumerate(scenarios):
        corpus = synth.build_corpus(windows, n_columns, M, controls, (scenario,),
                                    mu=mu, seed=seed + 1000 * s)
        for attr in ('windows', 'truth', 'suspicious', 'scenarios'):
            getattr(full, attr).extend(getattr(corpus, attr))
        full.controls.extend(corpus.controls)
        for algorithm in ALGORITHMS + ('merged',):
            algos = ALGORITHMS if algorithm == 'merged' else (algorithm,)
            report = evaluate_corpus(corpus, config, algos)
            rows.append({'scenario': scenario, 'algorithm': algorithm,
                         'recall': report.recall, 'accuracy': report.est_accuracy,
                         'extra_alerts': report.extra_alerts,
                         'mean_runtime': report.mean_runtime,
                         'max_runtime': report.max_runtime, 'windows': report.windows})
            logger.info("%s/%s: recall %s, accuracy %s." % (scenario, algorithm, report.recall,
                                                             report.est_accuracy))
    if corpus_path:
        synth.save_corpus(corpus_path, full)
    write_csv(os.path.join(out_dir, 'eval.csv'),
              ['scenario', 'algorithm', 'recall', 'accuracy', 'extra_alerts', 'mean_runtime',
               'max_runtime', 'windows'], rows, meta)
    return rows


def widen(window, extra, seed=0):
    """Append 'extra' independent noise columns to a window."""
    if extra <= 0:
        return window
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((window.M, extra))
    cols = window.cols + tuple('x%06d' % j for j in range(extra))
    return FeatureMatrix(window.rows, cols, np.hstack([window.data, noise]),
                         window.window_id, window.start, window.end)


def time_label_sweep(n, seed=0, repeats=3):
    """Seconds of each of 'repeats' gPS label sweeps on a planted n x n matrix."""
    P, _ = synth.gen_planted_matrix(synth.PlantedSpec(n, n // 10, 0.2, None, 0.9), seed)
    config = GpsConfig(ell=2)
    logs = LogCorrelations(P, config.eps)
    z = initial_labels(P, config)
    a, b = initial_params(logs, z, config)
    timings = []
    for _ in range(repeats):
        model = GpsModel(a.copy(), b.copy(), z.copy())
        started = time.perf_counter()
        update_labels(logs, model)
        timings.append(time.perf_counter() - started)
    return timings


def run_scaling(out_dir, config, meta=None, n_grid=(1000, 2000), factors=(1, 2, 3),
                sweep_grid=(500, 1000, 2000), trials=2, seed=0):
    """
    Runtime and recall of each algorithm as a planted window widens by adding
    non-anomalous columns, plus gPS label sweep timings; writes scaling.csv.
    """
    rows = []
    for n in n_grid:
        spec = synth.PlantedSpec(n, max(3, n // 20), 0.1, None, 0.85, strength=0.4)
        bases = [synth.gen_planted_stream(spec, seed + t) for t in range(trials)]
        for factor in factors:
            stats = {algorithm: ([], []) for algorithm in ALGORITHMS}
            for t, (base, labels) in enumerate(bases):
                truth = synth.truth_ids(base, labels)
                window = widen(base, (factor - 1) * n, seed + 100 * t + factor)
                for algorithm in ALGORITHMS:
                    result = run_window(window, replace(config, algorithms=(algorithm,)))
                    found = set()
                    for det in result.detections.get(algorithm, ()):
                        found.update(det.anomalies)
                    stats[algorithm][0].append(len(found & truth) / float(len(truth)))
                    stats[algorithm][1].append(sum(result.runtimes.values()))
            for algorithm, (recalls, runtimes) in stats.items():
                rows.append({'algorithm': algorithm, 'n': n * factor, 'factor': factor,
                             'recall': float(np.mean(recalls)),
                             'mean_runtime': float(np.mean(runtimes)),
                             'max_runtime': float(np.max(runtimes))})
                logger.info("%s at n=%d: mean runtime %.4fs." % (algorithm, n * factor,
                                                                 rows[-1]['mean_runtime']))
    for n in sweep_grid:
        timings = time_label_sweep(n, seed)
        rows.append({'algorithm': 'gps_sweep', 'n': n, 'factor': 1, 'recall': None,
                     'mean_runtime': float(np.mean(timings)),
                     'max_runtime': float(np.max(timings))})
    write_csv(os.path.join(out_dir, 'scaling.csv'),
              ['algorithm', 'n', 'factor', 'recall', 'mean_runtime', 'max_runtime'], rows, meta)
    return rows


def parameter_sweep(grid, corpus, base_config, seed=0):
    """
    One-at-a-time sweep: every grid value is evaluated with all other
    parameters at their base values.

    Args:
        grid (tuple): ((parameter, values), ...), see parse_grid
        corpus (synth.Corpus): evaluation corpus
        base_config (PipelineConfig): base parameters

    Returns:
        list: one dict per grid point with keys param, value, recall,
            accuracy, extra_alerts, mean_runtime
    """
    base_config = replace(base_config, rps=replace(base_config.rps, seed=seed))
    rows = []
    for name, values in grid:
        for value in values:
            report = evaluate_corpus(corpus, with_param(base_config, name, value))
            rows.append({'param': name, 'value': value, 'recall': report.recall,
                         'accuracy': report.est_accuracy, 'extra_alerts': report.extra_alerts,
                         'mean_runtime': report.mean_runtime})
            logger.info("%s=%s: recall %s, accuracy %s." % (name, value, report.recall,
                                                            report.est_accuracy))
    return rows


def count_inversions(values, increasing=True):
    """Adjacent steps against the expected direction; None entries are skipped."""
    values = [v for v in values if v is not None]
    sign = 1.0 if increasing else -1.0
    return sum(1 for a, b in zip(values, values[1:]) if sign * (b - a) < 0)


def has_interior_maximum(values):
    """Whether the largest value is reached away from both ends of the grid."""
    values = [v for v in values if v is not None]
    if len(values) < 3:
        return False
    return max(values[1:-1]) >= max(values[0], values[-1])


def sweep_trends(rows):
    """
    Trend summary of a parameter sweep, per swept parameter in grid order.

    Returns:
        dict: parameter -> {'recall_inversions': steps where recall drops,
            'accuracy_inversions': steps where accuracy rises,
            'recall_interior_max': recall peaks inside the grid}
    """
    trends = {}
    for name in dict.fromkeys(row['param'] for row in rows):
        selected = [row for row in rows if row['param'] == name]
        recalls = [row['recall'] for row in selected]
        accuracies = [row['accuracy'] for row in selected]
        trends[name] = {'recall_inversions': count_inversions(recalls),
                        'accuracy_inversions': count_inversions(accuracies, increasing=False),
                        'recall_interior_max': has_interior_maximum(recalls)}
    return trends


def run_sweep(out_dir, grid, corpus, config, meta=None, seed=0):
    """Parameter sweep over a corpus; writes sweep.csv."""
    rows = parameter_sweep(grid, corpus, config, seed)
    for name, trend in sweep_trends(rows).items():
        logger.info("%s trend: %d recall drops, %d accuracy rises, interior recall maximum %s."
                    % (name, trend['recall_inversions'], trend['accuracy_inversions'],
                       trend['recall_interior_max']))
    write_csv(os.path.join(out_dir, 'sweep.csv'),
              ['param', 'value', 'recall', 'accuracy', 'extra_alerts', 'mean_runtime'],
              rows, meta)
    return rows
