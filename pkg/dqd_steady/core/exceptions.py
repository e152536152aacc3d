# dqd_steady/core/exceptions.py
from django.core.exceptions import ImproperlyConfigured


class DQDError(Exception):
    """Base class for every error raised by the simulation services."""


class ConfigurationError(DQDError, ImproperlyConfigured):
    """Invalid run configuration: missing, unknown or out-of-range keys."""

    def __init__(self, message, keys=None):
        super().__init__(message)
        self.keys = list(keys or [])


class ParameterError(DQDError, ValueError):
    """A physical parameter violates its domain (e.g. eta outside [0, 1])."""


class NumericalError(DQDError):
    """Quadrature, fitting or integration did not meet its tolerance."""

    def __init__(self, message, /, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class QuadratureError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class ArtifactError(DQDError, OSError):
    """Fit artifact or CSV output could not be read or written."""
