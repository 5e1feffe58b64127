"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2.
"""


class FinetypeError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(FinetypeError):
    """Tensor shapes do not conform for the requested operation."""


class DataError(FinetypeError):
    """Input data violates a documented contract (bad labels, missing ids...)."""


class ParseError(DataError):
    """A file could not be parsed; message carries the offending line number."""


class ConfigError(FinetypeError):
    """A configuration value is out of range or inconsistent."""


class NumericError(FinetypeError):
    """NaN/Inf encountered where finite values are required."""


class StateError(FinetypeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class EvaluationError(FinetypeError):
    """Metrics requested over an empty or malformed unit list."""
