# -*- coding: utf-8 -*-
"""
cadstream configuration file parser and class.

This reads '$HOME/.config/cadstream.conf' (or a file named on the command line)
using the ConfigParser class and configures the cadstream command line tool. It
stores the stream window geometry, correlation and eigensolver settings, the
detector parameters and the alerting thresholds. The command line arguments take
higher priority over the configuration file.

After validation the parser is turned into frozen dataclasses (WindowSpec,
PipelineConfig with its RpsConfig and GpsConfig, RunConfig) that the rest of
the package consumes.
"""
import os
from configparser import ConfigParser
from dataclasses import dataclass, field

from cadstream.main.corrmat import MODES
from cadstream.main.errors import ConfigError
from cadstream.main.gps import GpsConfig
from cadstream.main.ingest import STREAM_KINDS, WindowSpec
from cadstream.main.pipeline import ALGORITHMS, REPORT_MODES, PipelineConfig
from cadstream.main.rps import SCOPES, RpsConfig

DEFAULT_PATHS = {'conf_dir' : os.path.expanduser('~') + '/.config',
                 'conf_file' : os.path.expanduser('~') + '/.config/cadstream.conf'}

# gPS group count defaults per stream kind
GPS_ELL_DEFAULTS = {'access_log': 2, 'price_csv': 5}

# section -> option -> (type, default); an empty default means "derived"
OPTIONS = {
    'general': {'seed': ('int', '0'),
                'jobs': ('int', '0'),
                'log_level': ('int', '2'),
                'output_directory': ('str', 'cadstream-out')},
    'window': {'kind': (STREAM_KINDS, 'access_log'),
               'length': ('int?', ''),
               'step': ('int?', ''),
               'min_entities': ('int', '2'),
               'strip_query': ('bool', 'true'),
               'max_delay': ('int', '0')},
    'corrmat': {'mode': (MODES, 'absolute'),
                'incremental': ('bool', 'false')},
    'spectral': {'tol': ('float', '1e-6'),
                 'max_iter': ('int', '300')},
    'pipeline': {'threshold': ('float', '0.7'),
                 'direct_threshold': ('float?', ''),
                 'strength_floor': ('float', '0.001'),
                 'algorithms': ('list', ','.join(ALGORITHMS)),
                 'report': (REPORT_MODES, 'merged'),
                 'signs': ('bool', 'true')},
    'rps': {'p': ('float', '1.4'),
            'ratio': ('float', '0.2'),
            'threshold': ('float', '0.7'),
            'scope': (SCOPES, 'window'),
            'min_set_size': ('int', '3')},
    'gps': {'ell': ('int?', ''),
            'alpha': ('float', '0.75'),
            'max_iter': ('int', '100'),
            'll_tol': ('float', '1e-6'),
            'eps': ('float', '1e-6'),
            'neighbor_threshold': ('float', '0.7'),
            'min_set_size': ('int', '3')},
}


class Configuration(ConfigParser):
    """
    Child class of the built-in module ConfigParser. Adapted to read a default
    location for a configuration file and to validate its contents.

    Attributes:
        conf_path (str): Configuration file path.
        explicit (bool): the path was given by the user, so it must exist.
    """
    def __init__(self, conf_path=None):
        """
        Initializes ConfigParser object with configuration path. If the path is set
        to None, use the default path.
        """
        super().__init__(strict=True, empty_lines_in_values=False)

        if conf_path is None:
            self.conf_path = DEFAULT_PATHS['conf_file']
            self.explicit = False
        else:
            self.conf_path = conf_path
            self.explicit = True

    def load(self):
        """
        Load the configuration file. A missing default file is not an error,
        every option then takes its default.

        Raises:
            FileNotFoundError: explicitly named configuration file is missing
            configparser.Error: file is not in INI syntax
        """
        if not os.path.exists(self.conf_path):
            if self.explicit:
                raise FileNotFoundError("No configuration file found in %s" % self.conf_path)
            return
        self.read(self.conf_path)

    def validate(self):
        """
        Validates the contents of the configuration file and fills in defaults.

        Raises:
            ConfigError: Validation error of loaded configuration
        """
        for sec in self.sections():
            if sec not in OPTIONS:
                raise ConfigError("'%s' is not a valid section" % sec)

        for sec, options in OPTIONS.items():
            if not self.has_section(sec):
                self.add_section(sec)
            for option in self[sec]:
                if option not in options:
                    raise ConfigError("'%s' is not a valid option in '%s' section" % (option, sec))
            for option, (_, default) in options.items():
                if option not in self[sec]:
                    self.set(sec, option, default)
            for option in options:
                self.typed(sec, option)

        log_level = self.getint('general', 'log_level')
        if log_level < 0 or log_level > 3:
            raise ConfigError("Option 'log_level' in 'general' is not an integer value"
                              " between 0 and 3 (inclusive)")
        if self.getint('general', 'seed') < 0:
            raise ConfigError("Option 'seed' in 'general' must be nonnegative")
        if self.getint('general', 'jobs') < 0:
            raise ConfigError("Option 'jobs' in 'general' must be nonnegative")

    def typed(self, section, option):
        """
        Read an option converted to its declared type.

        Raises:
            ConfigError: value does not match the option type
        """
        kind, _ = OPTIONS[section][option]
        value = self.get(section, option).strip()
        try:
            if isinstance(kind, tuple):
                if value not in kind:
                    raise ValueError("expected one of %s" % ', '.join(kind))
                return value
            if kind.endswith('?'):
                if value == '':
                    return None
                kind = kind[:-1]
            if kind == 'int':
                return int(value)
            if kind == 'float':
                return float(value)
            if kind == 'bool':
                return self.getboolean(section, option)
            if kind == 'list':
                items = tuple(v.strip() for v in value.split(',') if v.strip())
                unknown = [v for v in items if v not in ALGORITHMS]
                if unknown or not items:
                    raise ValueError("expected a comma separated subset of %s" % ', '.join(ALGORITHMS))
                return items
            return value
        except ValueError as err:
            raise ConfigError("Option '%s' in '%s' section has invalid value '%s' (%s)"
                              % (option, section, value, err))


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a detection run needs, typed.

    Attributes:
        kind (str): stream kind
        window (WindowSpec): window geometry
        pipeline (PipelineConfig): detector and alerting parameters
        strip_query (bool): drop query strings from request paths
        incremental (bool): maintain price window correlations incrementally
        seed (int): base seed
        jobs (int): worker threads, at least 1
        output_directory (str): where outputs are written
        log_level (int): 0 (debug) to 3 (error)
    """
    kind: str = 'access_log'
    window: WindowSpec = field(default_factory=lambda: WindowSpec.for_kind('access_log'))
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    strip_query: bool = True
    incremental: bool = False
    seed: int = 0
    jobs: int = 1
    output_directory: str = 'cadstream-out'
    log_level: int = 2


def build_run_config(config):
    """
    Build the typed run configuration from a validated Configuration.

    Raises:
        ConfigError: parameters violate a detector or window invariant
    """
    get = config.typed
    kind = get('window', 'kind')
    seed = get('general', 'seed')
    tol = get('spectral', 'tol')
    max_iter = get('spectral', 'max_iter')
    mode = get('corrmat', 'mode')

    window = WindowSpec.for_kind(kind, get('window', 'length'), get('window', 'step'),
                                 get('window', 'min_entities'), get('window', 'max_delay'))
    rps = RpsConfig(p=get('rps', 'p'), ratio=get('rps', 'ratio'),
                    threshold=get('rps', 'threshold'), seed=seed, scope=get('rps', 'scope'),
                    min_set_size=get('rps', 'min_set_size'), mode=mode, tol=tol,
                    max_iter=max_iter)
    ell = get('gps', 'ell')
    gps = GpsConfig(ell=GPS_ELL_DEFAULTS[kind] if ell is None else ell,
                    alpha=get('gps', 'alpha'), max_iter=get('gps', 'max_iter'),
                    ll_tol=get('gps', 'll_tol'), eps=get('gps', 'eps'),
                    neighbor_threshold=get('gps', 'neighbor_threshold'),
                    min_set_size=get('gps', 'min_set_size'), tol=tol)
    pipeline = PipelineConfig(threshold=get('pipeline', 'threshold'),
                              direct_threshold=get('pipeline', 'direct_threshold'),
                              strength_floor=get('pipeline', 'strength_floor'),
                              algorithms=get('pipeline', 'algorithms'),
                              report=get('pipeline', 'report'), mode=mode,
                              signs=get('pipeline', 'signs'), rps=rps, gps=gps)

    jobs = get('general', 'jobs')
    if jobs == 0:
        jobs = os.cpu_count() or 1
    return RunConfig(kind, window, pipeline, get('window', 'strip_query'),
                     get('corrmat', 'incremental'), seed, jobs,
                     get('general', 'output_directory'), get('general', 'log_level'))
