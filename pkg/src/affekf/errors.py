"""Exception types shared across the package."""


class AffEkfError(Exception):
    """Base class for all errors raised by this package."""


class OutOfChartError(AffEkfError):
    """A state (or error vector) left the valid neighborhood of a chart."""


class AngleNearPiError(OutOfChartError):
    """Rotation logarithm requested too close to the branch cut at pi."""


class SingularAffineError(AffEkfError):
    """An affine chart matrix is numerically singular."""


class SingularInnovationError(AffEkfError):
    """Innovation covariance cannot be inverted reliably."""


class SingularCovarianceError(AffEkfError):
    """A covariance (marginal) block cannot be inverted reliably."""


class DegenerateObservationError(AffEkfError):
    """An observation cannot be inverted into a feature initialization."""


class DegeneratePlaneError(DegenerateObservationError):
    """A plane feature came too close to the chart/model singularity d -> 0."""


class DimensionMismatchError(AffEkfError):
    """Matrix block dimensions are inconsistent."""


class VariantUnsupportedError(AffEkfError):
    """A filter variant was requested for a model that does not support it."""


class InfeasibleSpecError(AffEkfError):
    """Environment generation could not satisfy the requested constraints."""
