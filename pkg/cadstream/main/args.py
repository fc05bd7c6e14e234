# -*- coding: utf-8 -*-
"""
Command line argument parser and handler for the cadstream console script.

Global options come before the subcommand (detect, simulate, tune or report);
configuration overrides are subcommand options and take priority over the
configuration file.
"""
import argparse
import logging
import os
import shutil
import sys

from cadstream.main.config import ConfigError
from cadstream.main.config import DEFAULT_PATHS as def_paths
from cadstream.main.experiments import EXPERIMENTS
from cadstream.main.ingest import STREAM_KINDS
from cadstream.main.pipeline import REPORT_MODES
from cadstream.main.synth import SCENARIOS

EXIT_IO = 2
EXIT_CONFIG = 3

LOG_LEVEL_MAP = {0 : logging.DEBUG,
                 1 : logging.INFO,
                 2 : logging.WARNING,
                 3 : logging.ERROR}

# argument dest -> (section, option) of the configuration it overrides
CONFIG_OVERRIDES = {'kind': ('window', 'kind'),
                    'window': ('window', 'length'),
                    'step': ('window', 'step'),
                    'threshold': ('pipeline', 'threshold'),
                    'direct_threshold': ('pipeline', 'direct_threshold'),
                    'strength_floor': ('pipeline', 'strength_floor'),
                    'algorithms': ('pipeline', 'algorithms'),
                    'report': ('pipeline', 'report'),
                    'rps_p': ('rps', 'p'),
                    'rps_ratio': ('rps', 'ratio'),
                    'rps_threshold': ('rps', 'threshold'),
                    'gps_ell': ('gps', 'ell'),
                    'gps_alpha': ('gps', 'alpha'),
                    'incremental': ('corrmat', 'incremental'),
                    'seed': ('general', 'seed'),
                    'jobs': ('general', 'jobs'),
                    'out': ('general', 'output_directory')}


def _add_help(group):
    group.add_argument('-h', '--help', action='help', help='show this help message and exit')


def parse_arguments(argv=None):
    """
    Define the command line argument structure and parse it.

    Args:
        argv (list): arguments without the program name; sys.argv by default
    """
    cmd_args = argparse.ArgumentParser(
        prog='cadstream',
        description='cadstream: correlated anomaly detection on windowed data streams.',
        usage='%(prog)s [options] {detect,simulate,tune,report} ...',
        add_help=False
    )
    runtime_args = cmd_args.add_argument_group('runtime arguments')
    _add_help(runtime_args)
    runtime_args.add_argument('-c', '--config', action='store', default=None, metavar='FILE',
                              help='configuration file (default ~/.config/cadstream.conf)')
    runtime_args.add_argument('--copy-config', action='store_true',
                              help='copy example config file to ~/.config/cadstream.conf')
    runtime_args.add_argument('-l', '--log-level', action='store', default=None, type=int,
                              metavar='N', help='log verbosity, 0 (debug) to 3 (error)')

    commands = cmd_args.add_subparsers(dest='command', metavar='COMMAND')

    # detect
    detect = commands.add_parser('detect', add_help=False,
                                 help='detect correlated anomalies in input streams')
    io_args = detect.add_argument_group('input/output arguments')
    _add_help(io_args)
    io_args.add_argument('--input', nargs='+', default=[], metavar='PATH',
                         help='access log or price CSV files')
    io_args.add_argument('--out', default=None, metavar='DIR', help='output directory')
    config_args = detect.add_argument_group('configuration arguments',
                                            description='override configuration file options')
    config_args.add_argument('--kind', default=None, choices=STREAM_KINDS, help='stream kind')
    config_args.add_argument('--window', default=None, type=int, metavar='N',
                             help='window length (seconds or trading days)')
    config_args.add_argument('--step', default=None, type=int, metavar='N', help='window step')
    config_args.add_argument('--threshold', default=None, type=float, metavar='X',
                             help='alert score threshold')
    config_args.add_argument('--direct-threshold', default=None, type=float, metavar='X',
                             help='alert score threshold of direct PS')
    config_args.add_argument('--strength-floor', default=None, type=float, metavar='X',
                             help='minimum anomaly strength of an alert')
    config_args.add_argument('--rps.p', dest='rps_p', default=None, type=float, metavar='X',
                             help='rPS sampling norm order')
    config_args.add_argument('--rps.ratio', dest='rps_ratio', default=None, type=float,
                             metavar='X', help='rPS sampling ratio')
    config_args.add_argument('--rps.threshold', dest='rps_threshold', default=None, type=float,
                             metavar='X', help='rPS membership threshold')
    config_args.add_argument('--gps.ell', dest='gps_ell', default=None, type=int, metavar='N',
                             help='gPS anomaly group count')
    config_args.add_argument('--gps.alpha', dest='gps_alpha', default=None, type=float,
                             metavar='X', help='gPS minimum anomaly group mean')
    config_args.add_argument('--algorithms', default=None, metavar='LIST',
                             help='comma separated subset of direct,rps,gps')
    config_args.add_argument('--report', default=None, choices=REPORT_MODES,
                             help='one merged alert per window or one per algorithm')
    config_args.add_argument('--incremental', action='store_const', const='true', default=None,
                             help='update price window correlations incrementally')
    config_args.add_argument('--seed', default=None, type=int, metavar='N', help='base seed')
    config_args.add_argument('--jobs', default=None, type=int, metavar='N',
                             help='worker threads, 0 for all cores')

    # simulate
    simulate = commands.add_parser('simulate', add_help=False,
                                   help='run a synthetic experiment')
    sim_args = simulate.add_argument_group('experiment arguments')
    _add_help(sim_args)
    sim_args.add_argument('EXPERIMENT', help='one of %s' % ', '.join(EXPERIMENTS))
    sim_args.add_argument('--rule', default='n^0.8', help="anomaly growth rule, 'n^m' or 'c*n'")
    sim_args.add_argument('--phi', nargs='+', type=float, default=None, metavar='X',
                          help='anomaly fractions (concentration)')
    sim_args.add_argument('--n-grid', nargs='+', type=int, default=None, metavar='N',
                          help='matrix widths')
    sim_args.add_argument('--trials', type=int, default=None, metavar='N',
                          help='seeded trials per point')
    sim_args.add_argument('--mu', type=float, default=None, metavar='X',
                          help='background mean correlation')
    sim_args.add_argument('--mu-tilde', type=float, default=0.85, metavar='X',
                          help='anomaly mean correlation')
    sim_args.add_argument('--scenarios', nargs='+', default=list(SCENARIOS), choices=SCENARIOS,
                          help='injection scenarios')
    sim_args.add_argument('--windows', type=int, default=12, metavar='N',
                          help='injected windows per scenario')
    sim_args.add_argument('--save-corpus', default=None, metavar='FILE',
                          help='store the injection corpus (.npz) for tune')
    sim_args.add_argument('--seed', type=int, default=None, metavar='N', help='base seed')
    sim_args.add_argument('--out', default=None, metavar='DIR', help='output directory')

    # tune
    tune = commands.add_parser('tune', add_help=False, help='sweep detector parameters')
    tune_args = tune.add_argument_group('sweep arguments')
    _add_help(tune_args)
    tune_args.add_argument('--grid', default=None, metavar='GRID',
                           help="grid such as 'p=1,1.4;ratio=0.1,0.2' (default: full grid)")
    tune_args.add_argument('--corpus', default=None, metavar='FILE',
                           help='corpus from simulate injection --save-corpus')
    tune_args.add_argument('--seed', type=int, default=None, metavar='N', help='base seed')
    tune_args.add_argument('--out', default=None, metavar='DIR', help='output directory')

    # report
    report = commands.add_parser('report', add_help=False, help='render an alert stream')
    report_args = report.add_argument_group('report arguments')
    _add_help(report_args)
    report_args.add_argument('ALERTS', help='alerts.jsonl written by detect')
    report_args.add_argument('--out', default=None, metavar='DIR', help='output directory')

    p_args = cmd_args.parse_args(argv)
    if p_args.command is None and not p_args.copy_config:
        cmd_args.print_usage(sys.stderr)
        print("Error: no COMMAND specified.", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    return p_args


def copy_config():
    """Copy the example configuration to the default location and exit."""
    if os.path.exists(def_paths['conf_file']):
        print("Configuration file already exists, not doing anything.", file=sys.stderr)
        sys.exit(1)

    conf_example = os.path.join(os.path.dirname(__file__), '../share/cadstream.example.conf')
    if not os.path.exists(conf_example):
        print("Cannot find or read example cadstream configuration.", file=sys.stderr)
        sys.exit(EXIT_IO)

    print("Copying configuration to %s." % def_paths['conf_file'])
    os.makedirs(def_paths['conf_dir'], exist_ok=True)
    shutil.copyfile(conf_example, def_paths['conf_file'])
    print("Done.")
    sys.exit(0)


def validate_args_and_config(p_args, config):
    """
    Validate the configuration file and command line arguments, apply the
    command line overrides and set up logging.

    Exits with code 2 on I/O errors and 3 on configuration errors.

    Args:
        p_args (argparse.Namespace): Parsed arguments.
        config (Configuration): cadstream configuration.
    """
    if p_args.copy_config:
        copy_config()

    try:
        config.load()
        config.validate()
    except ConfigError as conf_err:
        print("Configuration error: %s" % conf_err, file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    except OSError as err:
        print("Error: %s" % err, file=sys.stderr)
        sys.exit(EXIT_IO)
    except Exception as err: # malformed file contents
        print("Configuration error: %s" % err, file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    # override configuration options if command line flags are used
    for dest, (section, option) in CONFIG_OVERRIDES.items():
        value = getattr(p_args, dest, None)
        if value is None:
            continue
        config.set(section, option, str(value))
    try:
        config.validate()
    except ConfigError as conf_err:
        print("Configuration error: %s" % conf_err, file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    if p_args.log_level is not None:
        if p_args.log_level not in LOG_LEVEL_MAP:
            print("Error: log level must be 0, 1, 2 or 3 (the lower, the more verbose).",
                  file=sys.stderr)
            sys.exit(EXIT_CONFIG)
        config.set('general', 'log_level', str(p_args.log_level))

    logging.basicConfig(format='[%(levelname)s] <%(name)s>: %(message)s',
                        level=LOG_LEVEL_MAP[config.getint('general', 'log_level')])
