"""Exception hierarchy used across the package."""


class CritLayerError(Exception):
    """Base class for all package errors."""


class DomainError(CritLayerError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RegimeError(CritLayerError, ValueError):
    """Regime parameters are inconsistent (bad case/beta combination,
    epsilon too large for the requested slope angle, ...)."""


class NumericalError(CritLayerError, RuntimeError):
    """A numerical procedure failed to reach its accuracy contract."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class SingularModeError(NumericalError):
    """Eigenvector/pressure denominator vanished; the supplied decay rate is
    not an exact root of the characteristic polynomial."""


class NearSingularError(NumericalError):
    """Amplitude system determinant below threshold."""

    def __init__(self, msg, det=None, eps=None):
        super().__init__(msg)
        self.det = det
        self.eps = eps


class ClassificationError(NumericalError):
    """Root-to-family assignment was ambiguous."""


class AccuracyError(NumericalError):
    """Quadrature or grid resolution check failed."""


class ConfigError(CritLayerError, ValueError):
    """Malformed run configuration."""
