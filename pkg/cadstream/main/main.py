# -*- coding: utf-8 -*-
"""
The cadstream command-line tool. This script is used as a console script entry
point for setuptools.

Exit codes: 0 on success, 1 on interrupt, 2 on input/output errors and 3 on
configuration errors.
"""
import sys
import time

from cadstream.main.args import parse_arguments, validate_args_and_config
from cadstream.main.config import Configuration
from cadstream.main.errors import (CalibrationError, ConfigError, ContractError,
                                   ThreadInterruptError)
from cadstream.main.main_funcs import (EXIT_CONFIG, EXIT_IO, cmd_detect, cmd_report,
                                       cmd_simulate, cmd_tune)

COMMANDS = {'detect': cmd_detect,
            'simulate': cmd_simulate,
            'tune': cmd_tune,
            'report': cmd_report}


def run(argv=None):
    """
    Parse the command line, run the subcommand and return its exit code.
    Argument and configuration errors exit from within validation.
    """
    parsed_args = parse_arguments(argv)
    config = Configuration(parsed_args.config)
    validate_args_and_config(parsed_args, config)

    start_time = time.perf_counter()
    try:
        code = COMMANDS[parsed_args.command](parsed_args, config)
    except (ConfigError, ContractError, CalibrationError) as conf_err:
        print("Configuration error: %s" % conf_err, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as io_err: # includes IngestError
        print("Error: %s" % io_err, file=sys.stderr)
        return EXIT_IO
    except (ThreadInterruptError, KeyboardInterrupt):
        print("Processing interrupted, outputs are incomplete.", file=sys.stderr)
        return 1

    if parsed_args.command != 'report':
        print("Completed in %.3f seconds." % (time.perf_counter() - start_time))
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == '__main__':
    main()
