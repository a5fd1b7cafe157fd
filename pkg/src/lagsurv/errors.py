"""Exception taxonomy shared across the package.

The CLI maps these onto exit statuses: usage/configuration problems exit 2,
data problems exit 3, numeric failures exit 4.
"""


class LagsurvError(Exception):
    """Base class for all package errors."""


class ConfigError(LagsurvError):
    """Invalid configuration: bad widths, unknown keys, out-of-range settings."""


class DataError(LagsurvError):
    """Invalid input data: bad files, out-of-range times, empty event sets."""


class NumericError(LagsurvError):
    """Numerical failure: non-finite losses or fields, degenerate kernels."""


class DegenerateKernelError(NumericError):
    """The lag kernel collapsed to the zero vector and cannot be projected."""
