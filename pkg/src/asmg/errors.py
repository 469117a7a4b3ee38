"""Exception types shared across the package."""


class AsmgError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AsmgError):
    """Invalid configuration: grid sizes, covering parameters, CLI values."""


class DimensionError(AsmgError):
    """Operands with incompatible shapes."""


class CoefficientError(AsmgError):
    """Non-positive or otherwise invalid coefficient data."""


class RasterError(AsmgError):
    """Malformed coefficient raster file."""


class FactorizationError(AsmgError):
    """Dense or incomplete factorization failed (non-positive pivot)."""

    def __init__(self, message, pivot=None, subdomain=None):
        super().__init__(message)
        self.pivot = pivot
        self.subdomain = subdomain


class SolverStallError(AsmgError):
    """An inner iterative solve did not reach its tolerance within the cap."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BreakdownError(AsmgError):
    """Krylov breakdown: non-positive direction curvature on an SPD problem."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class InternalError(AsmgError):
    """Bug trap: an invariant that must hold by construction was violated."""
