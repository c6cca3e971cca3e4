"""Exception hierarchy used across the package."""


class NVSqueezeError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(NVSqueezeError, ValueError):
    pass


class InvalidParameterError(NVSqueezeError, ValueError):
    pass


class DimensionMismatchError(NVSqueezeError, ValueError):
    pass


class TruncationError(NVSqueezeError, ValueError):
    """Raised when a Fock-space cutoff discards too much probability."""

    def __init__(self, message, min_dim=None):
        super().__init__(message)
        self.min_dim = min_dim


class UnsupportedRegimeError(NVSqueezeError, ValueError):
    pass


class IntegrationError(NVSqueezeError, RuntimeError):
    """Step-size underflow or loss of positivity during propagation."""


class ProtocolConstraintError(NVSqueezeError, ValueError):
    pass


class UndefinedDirectionError(NVSqueezeError, ValueError):
    pass


class InfeasibleTargetError(NVSqueezeError, ValueError):
    pass


class FitError(NVSqueezeError, ValueError):
    pass


class ConfigError(NVSqueezeError, ValueError):
    pass


class MonotonicityError(NVSqueezeError, ValueError):
    """A curve assumed monotone is not; ``curve`` holds the sampled points."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve or []
