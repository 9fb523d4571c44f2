"""Exception hierarchy shared by all stochtube modules."""


class StochTubeError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(StochTubeError):
    """Base class for failures of a numerical procedure."""


class OriginSingularity(NumericalError):
    """Variation matrix of the Hopf circle requested at the origin."""


class NonFinite(NumericalError):
    """A state or covariance component overflowed or became NaN."""


class NoConvergence(NumericalError):
    """Limit-cycle detection did not settle within the iteration budget."""


class DegenerateStart(NumericalError):
    """Cycle search started on a fixed point of the flow."""


class SingularJacobian(NumericalError):
    """Jacobian determinant underflowed during closed-form quadrature."""


class NotConverged(NumericalError):
    """Tube width did not become periodic within tolerance."""


class NonPositiveRate(NumericalError):
    """A contraction rate that must be positive was not."""


class EmptyBin(NumericalError):
    """A cycle section received too few ensemble samples."""


class ExtentTooSmall(NumericalError):
    """Too much density mass falls outside the requested grid."""


class GridMismatch(NumericalError):
    """Two density grids with different extent or resolution were compared."""


class ConfigError(StochTubeError):
    """Invalid run configuration (unknown key, bad value)."""


class EmptyProfile(NumericalError):
    """A tube profile with no samples was passed on for output."""
