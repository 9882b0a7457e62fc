"""Exception hierarchy shared across the package.

Errors are grouped by how the CLI maps them to exit codes:
usage problems exit 1, data/compatibility problems exit 2,
numeric failures exit 3.
"""


class ExprAuthError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ExprAuthError):
    """Invalid configuration values or unknown config keys."""


class ShapeError(ExprAuthError):
    """Tensor shapes inconsistent with the declared contract."""


class DomainError(ExprAuthError):
    """A value outside its valid domain (e.g. timestep out of range)."""


class GridError(ExprAuthError):
    """Timestep grid cannot be constructed as requested."""


class InputError(ExprAuthError):
    """Missing or empty input data."""


class InsufficientDataError(InputError):
    """Not enough samples to fit a statistic."""


class TrainingError(ExprAuthError):
    """Non-finite loss or other unrecoverable training failure."""


class NumericError(ExprAuthError):
    """Non-finite values encountered during inference or scoring."""


class ScoringError(NumericError):
    """Numeric failure inside the authentication score computation."""


class DegenerateModelError(ScoringError):
    """Score denominator collapsed to zero."""


class CorruptionError(ExprAuthError):
    """Checkpoint payload fails integrity verification."""


class CompatibilityError(ExprAuthError):
    """Checkpoint does not match the configuration it is loaded against."""
