"""Exception taxonomy.

Everything raised on purpose by this package derives from DampedWaveError,
so callers can catch a single type at the boundary and still branch on the
specific failure when they need to.
"""


class DampedWaveError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DampedWaveError):
    """Operands have incompatible shapes or lengths."""


class NotSPD(DampedWaveError):
    """A matrix required to be symmetric positive definite failed factorization."""


class EmptySubspace(DampedWaveError):
    """A subspace basis has zero columns where a nonempty one is required."""


class SizeLimitExceeded(DampedWaveError):
    """Problem dimension exceeds the documented dense-method limit."""


class ZeroDifferential(DampedWaveError):
    """The differential vanishes where a nonzero map is required."""


class NonPositiveInput(DampedWaveError):
    """A strictly positive scalar argument was zero or negative."""


class IncompatibleInitialData(DampedWaveError):
    """Initial data violates the compatibility condition."""


class SingularSaddle(DampedWaveError):
    """The primitive initialization system is singular or inconsistent."""


class NonPositiveTau(DampedWaveError):
    """Time step must be strictly positive."""


class NonPositiveEnergy(DampedWaveError):
    """Energy samples must be strictly positive for log-space fitting."""


class WindowTooShort(DampedWaveError):
    """A fit window has fewer samples than required."""


class InvalidGraph(DampedWaveError):
    """Network graph is malformed or not connected to ground."""


class InvalidSpec(DampedWaveError):
    """Model specification or configuration violates its invariants."""
