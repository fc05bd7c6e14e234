# -*- coding: utf-8 -*-
"""
Runtime exceptions for cadstream. ConfigError is re-exported by config.py.
"""


class ConfigError(Exception):
    """
    Configuration exception class. Primarily to be used for configuration file
    validation errors and for invalid detector parameters.
    """


class ContractError(ValueError):
    """
    Raised when a caller violates a documented precondition, e.g. vectors of
    different lengths passed to pearson() or a non-symmetric matrix passed to
    the eigensolver.
    """


class DomainError(ValueError):
    """Raised when a special function is evaluated outside of its domain."""


class SamplingError(ValueError):
    """Raised when no valid column sampling distribution exists."""


class CalibrationError(RuntimeError):
    """
    Raised by synthetic generators when requested parameters cannot be met
    (infeasible Beta moments, or a bisection that fails to converge).
    """


class IngestError(IOError):
    """File-level input error, e.g. a price CSV without a usable header."""


class ThreadInterruptError(Exception):
    """
    Interrupt exception class. Used for a thread listening for an interrupt event.
    """
