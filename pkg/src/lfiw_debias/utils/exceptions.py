"""Exceptions raised by the package.

The command line maps these onto exit codes: configuration problems exit with 2,
I/O problems (plain :class:`OSError`) with 3 and numerical failures with 4.
"""


class LfiwError(Exception):
    """Base class for all errors raised by the package."""


class ConfigError(LfiwError, ValueError):
    """Invalid configuration, unknown keys or out-of-range parameters."""


class DimensionMismatchError(LfiwError, ValueError):
    """Feature dimensions of two inputs disagree."""


class EmptyDataError(LfiwError, ValueError):
    """A dataset, class, evaluation set or partition is empty."""


class NumericalError(LfiwError, ArithmeticError):
    """A computation produced a non-finite or undefined result."""


class SupportError(NumericalError):
    """The true distribution puts mass where the model distribution has none."""


class SamplerError(LfiwError, RuntimeError):
    """A user supplied sampler failed or returned malformed output."""
