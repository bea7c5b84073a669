"""Exception types shared across the package.

Every numerical failure mode has its own class so callers (and the CLI exit
code logic) can dispatch on the error name rather than on message text.
"""


class NhtdseError(Exception):
    """Base class for all package-specific errors."""


class NonFinite(NhtdseError):
    """A matrix or vector contains NaN or infinite entries."""


class Defective(NhtdseError):
    """The eigenvector matrix is numerically singular (exceptional point)."""


class DimensionMismatch(NhtdseError):
    """Operands have incompatible shapes."""


class ZeroState(NhtdseError):
    """A state vector with zero norm was supplied where a ray is required."""


class NotPositiveDefinite(NhtdseError):
    """A matrix required to be hermitian positive-definite is not."""


class TrackingLost(NhtdseError):
    """Eigenstate continuation is ambiguous (best overlap below threshold)."""


class IllConditionedMetric(NhtdseError):
    """The instantaneous metric is too ill-conditioned to invert reliably."""


class QuenchAdjacent(NhtdseError):
    """A finite-difference stencil would straddle a declared discontinuity."""


class StepSizeUnderflow(NhtdseError):
    """The adaptive integrator cannot proceed without shrinking the step below
    the resolvable limit (stiffness or a near-exceptional point)."""


class DegenerateOverlap(NhtdseError):
    """Left and right states are nearly orthogonal; the shared normalizer is
    too small to divide by."""


class DegenerateFermiLevel(NhtdseError):
    """A level crossing at the Fermi energy makes the requested filling
    ambiguous."""


class ConfigError(NhtdseError):
    """A scenario configuration failed validation."""
