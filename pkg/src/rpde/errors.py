"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError/UsageError -> 2,
NumericFault -> 3.
"""


class RpdeError(Exception):
    """Base class for all package-specific errors."""


class UsageError(RpdeError, ValueError):
    """An API was called with arguments that violate its contract."""


class ConfigError(RpdeError, ValueError):
    """A run configuration (or checkpoint header) is invalid."""


class NumericFault(RpdeError, ArithmeticError):
    """A non-finite value appeared where finite arithmetic was required."""


class DegenerateDistributionError(RpdeError, ValueError):
    """A sample set has zero variance where a spread is required."""
