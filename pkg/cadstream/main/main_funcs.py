# -*- coding: utf-8 -*-
"""
cadstream command line script wrapper functions.

One function per subcommand. Each takes the parsed arguments and the validated
configuration, writes its outputs and returns the exit code; exceptions are
left to the console script, which turns them into exit codes.
"""
import heapq
import logging
import os
import sys

from cadstream.main import experiments, report, synth
from cadstream.main.config import build_run_config
from cadstream.main.corrmat import PairStats
from cadstream.main.errors import ConfigError
from cadstream.main.ingest import WindowSlider
from cadstream.main.pipeline import DetectionRunner
from cadstream.main.provenance import (AlertWriter, compute_hash, metadata, write_csv,
                                       write_json)
from cadstream.main.source import InputSource

EXIT_IO = 2
EXIT_CONFIG = 3

SIMULATE_DEFAULTS = {
    'degeneration': {'mu': 0.5, 'n_grid': (200, 500, 1000, 2000, 4000, 8000), 'trials': 3},
    'concentration': {'mu': 0.3, 'phi': (0.3, 0.5, 0.7), 'n_grid': (2000,), 'trials': 20},
    'injection': {'mu': 0.1},
    'scaling': {'n_grid': (1000, 2000), 'trials': 2},
}


def parse_sources(paths, run_config):
    """
    Create InputSource objects and validate them.

    Args:
        paths (list): input file paths.
        run_config (RunConfig): typed configuration.

    Returns:
        src_objects (list): List of (parsed) InputSource objects.
    """
    src_objects = list()
    src_errors = dict()

    src_log = logging.getLogger('parse_source')

    for source_path in paths:
        src_log.debug("Creating source object: %s" % source_path)
        try:
            source = InputSource(source_path, run_config.kind, run_config.strip_query)
            source.parse()
        except (OSError, ConfigError) as src_parse_error:
            src_errors[source_path] = str(src_parse_error)
            continue
        src_log.debug("Passed: %s" % source_path)
        src_objects.append(source)

    if len(src_errors) != 0:
        src_log.error("Errors were found in some of the input files.")
        for source_path in src_errors:
            src_log.error("INPUT: %s" % source_path)
            src_log.error(src_errors[source_path])
        print("Error: cannot read input files: %s" % ', '.join(src_errors), file=sys.stderr)
        sys.exit(EXIT_IO)
    return src_objects


def stream_events(sources, kind):
    """
    Events of all sources as one stream. Access logs are merged on
    timestamp; price files are concatenated.
    """
    if kind == 'access_log':
        return heapq.merge(*(source.events() for source in sources),
                           key=lambda event: event.timestamp)
    return (event for source in sources for event in source.events())


class IncrementalWindows(object):
    """
    Pairs each window with its correlation matrix, maintained by sliding a
    PairStats through consecutive windows.
    """
    def __init__(self, windows, mode='absolute'):
        self.windows = windows
        self.mode = mode
        self.stats = None

    def __iter__(self):
        for X in self.windows:
            if self.stats is None:
                self.stats = PairStats(X)
                P = self.stats.correlation(self.mode)
            else:
                P, _ = self.stats.slide_to(X, self.mode)
            yield X, P

    @property
    def fallbacks(self):
        return self.stats.fallbacks if self.stats is not None else 0


def cmd_detect(p_args, config):
    """
    Run detection over the input streams; writes alerts.jsonl and
    summary.json to the output directory.

    Returns:
        int: exit code
    """
    run = build_run_config(config)
    if not p_args.input:
        raise ConfigError("no --input file specified")

    sources = parse_sources(p_args.input, run)
    out_dir = run.output_directory
    os.makedirs(out_dir, exist_ok=True)

    inputs = {}
    for source in sources:
        source.digest = compute_hash(source.path)
        inputs[source.localfile] = source.digest
        source.logger.debug("Computed input digest: %s" % source.digest)
    meta = metadata(config, run.seed, inputs=inputs)

    slider = WindowSlider(run.window)
    windows = slider.slide(stream_events(sources, run.kind), run.kind)
    incremental = None
    if run.incremental and run.kind == 'price_csv':
        incremental = IncrementalWindows(windows, run.pipeline.mode)
        windows = iter(incremental)

    runner = DetectionRunner(run.pipeline, run.jobs)
    with AlertWriter(os.path.join(out_dir, 'alerts.jsonl'), meta) as writer:
        for result in runner.run(windows):
            for alert in result.alerts:
                writer.write(alert)

    skipped_lines = sum(source.skipped for source in sources)
    if skipped_lines:
        logging.getLogger('detect').warning("Skipped %d malformed input lines." % skipped_lines)

    summary = runner.summary.to_dict()
    summary.update({'skipped_windows': slider.skipped,
                    'late_events': slider.late,
                    'skipped_lines': skipped_lines,
                    'incremental_fallbacks': incremental.fallbacks if incremental else 0})
    write_json(os.path.join(out_dir, 'summary.json'), summary, meta)

    print("Processed %d windows, %d alerts written to %s."
          % (summary['windows'], writer.count, os.path.join(out_dir, 'alerts.jsonl')))
    return 0


def _simulate_option(p_args, experiment, name):
    value = getattr(p_args, name, None)
    if value is None:
        value = SIMULATE_DEFAULTS[experiment].get(name)
    return value


def cmd_simulate(p_args, config):
    """
    Run a synthetic experiment and write its CSV tables.

    Returns:
        int: exit code
    """
    experiment = p_args.EXPERIMENT
    if experiment not in experiments.EXPERIMENTS:
        raise ConfigError("unknown experiment '%s', expected one of %s"
                          % (experiment, ', '.join(experiments.EXPERIMENTS)))
    run = build_run_config(config)
    out_dir = run.output_directory
    os.makedirs(out_dir, exist_ok=True)

    def option(name):
        return _simulate_option(p_args, experiment, name)

    meta = metadata(config, run.seed, experiment=experiment)

    if experiment == 'degeneration':
        meta.update(rule=p_args.rule, mu=option('mu'), mu_tilde=p_args.mu_tilde, n0=200)
        rows = experiments.run_degeneration(out_dir, meta, option('mu'), p_args.mu_tilde,
                                            p_args.rule, option('n_grid'), option('trials'),
                                            run.seed)
    elif experiment == 'concentration':
        meta.update(mu=option('mu'), mu_tilde=p_args.mu_tilde)
        rows = experiments.run_concentration(out_dir, meta, option('mu'), p_args.mu_tilde,
                                             option('phi'), option('n_grid')[0],
                                             option('trials'), run.seed)
    elif experiment == 'injection':
        rows = experiments.run_injection(out_dir, run.pipeline, meta, tuple(p_args.scenarios),
                                         p_args.windows, mu=option('mu'), seed=run.seed,
                                         corpus_path=p_args.save_corpus)
    else:
        rows = experiments.run_scaling(out_dir, run.pipeline, meta, option('n_grid'),
                                       trials=option('trials'), seed=run.seed)

    print("Experiment '%s' wrote %d rows to %s." % (experiment, len(rows), out_dir))
    return 0


def cmd_tune(p_args, config):
    """
    Sweep detector parameters over an evaluation corpus; writes sweep.csv.

    Without --corpus a default injection corpus is generated from the seed.

    Returns:
        int: exit code
    """
    grid = experiments.parse_grid(p_args.grid) if p_args.grid is not None \
        else experiments.DEFAULT_GRID
    run = build_run_config(config)

    if p_args.corpus is not None:
        if not os.path.isfile(p_args.corpus):
            raise FileNotFoundError("corpus file '%s' does not exist" % p_args.corpus)
        corpus = synth.load_corpus(p_args.corpus)
    else:
        corpus = synth.build_corpus(seed=run.seed)

    out_dir = run.output_directory
    os.makedirs(out_dir, exist_ok=True)
    meta = metadata(config, run.seed, corpus=p_args.corpus or 'generated')
    rows = experiments.run_sweep(out_dir, grid, corpus, run.pipeline, meta, run.seed)
    print("Parameter sweep wrote %d rows to %s." % (len(rows), out_dir))
    return 0


def cmd_report(p_args, config):
    """
    Render an alert stream as timeline.csv and print a text summary.

    Returns:
        int: exit code
    """
    if not os.path.isfile(p_args.ALERTS):
        raise FileNotFoundError("alerts file '%s' does not exist" % p_args.ALERTS)
    meta, alerts = report.read_alerts(p_args.ALERTS)

    out_dir = p_args.out or os.path.dirname(os.path.abspath(p_args.ALERTS))
    os.makedirs(out_dir, exist_ok=True)
    rows = report.build_timeline(alerts)
    header = dict(meta)
    header['source'] = os.path.basename(p_args.ALERTS)
    write_csv(os.path.join(out_dir, 'timeline.csv'), report.TIMELINE_FIELDS, rows, header)
    print(report.summarize(alerts))
    return 0
