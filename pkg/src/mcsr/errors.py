"""Exception types shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4),
so library code should raise the most specific class that applies.
"""


class McsrError(Exception):
    """Base class for all package errors."""


class ConfigError(McsrError, ValueError):
    """Invalid configuration: bad flag combination, shape mismatch at build
    time, non-divisible scale factor, unknown config keys, and the like."""


class ShapeError(ConfigError):
    """Array shapes incompatible with the requested operation."""


class DataError(McsrError, ValueError):
    """Unreadable or inconsistent on-disk data (bad magic, truncation,
    missing files, malformed manifests)."""


class NumericError(McsrError, ArithmeticError):
    """Non-finite values where finite ones are required: NaN/Inf inputs,
    NaN gradients, diverged losses."""
