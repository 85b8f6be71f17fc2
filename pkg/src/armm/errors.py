"""Exception taxonomy.

Two families matter to callers: validation errors (bad inputs or settings,
detectable before any numerics run) and numerical errors (the data defeated
the computation). The command line tool maps the families to distinct exit
codes.
"""


class ArmmError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ArmmError):
    """Input or configuration rejected before computation."""


class NumericalError(ArmmError):
    """Computation failed on numerically unusable data."""


class ConfigError(ValidationError):
    """Inconsistent or out-of-range settings."""


class InsufficientData(ValidationError):
    """Too few observations for the requested operation."""


class LagOutOfRange(ValidationError):
    """Autocovariance lag outside [0, n-1]."""


class SeriesTooShort(ValidationError):
    """Series shorter than the feature window requires."""


class DegenerateSeries(ValidationError):
    """Series has zero variance after centering."""


class PanelFormatError(ValidationError):
    """Malformed panel file; message carries the offending line number."""


class DomainError(NumericalError):
    """Argument outside a special function's domain."""


class NotPositiveDefinite(NumericalError):
    """Matrix expected to be symmetric positive definite is not."""


class EmptyClusterError(NumericalError):
    """A mixture component lost all responsibility mass."""


class NumericalFailure(NumericalError):
    """Unrecoverable floating-point breakdown (underflow, no usable restart)."""
