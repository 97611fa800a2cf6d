"""Exception hierarchy."""


class SemibeamError(Exception):
    """Base class for all errors raised by this package."""


class SpectralError(SemibeamError, ValueError):
    """Invalid input to a spectral-basis routine."""


class ParameterError(SemibeamError, ValueError):
    """A model parameter violates its invariant.

    ``field`` names the offending parameter.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DimensionError(SemibeamError, ValueError):
    """State and operator sizes do not match."""


class SingularSystemError(SemibeamError, ArithmeticError):
    """A linear solve was (numerically) singular.

    ``lam`` is the frequency on the imaginary axis, or None for real solves.
    """

    def __init__(self, message, lam=None, condition=None):
        super().__init__(message)
        self.lam = lam
        self.condition = condition


class FitError(SemibeamError, ValueError):
    """Not enough usable samples for a least-squares fit."""


class ConfigError(SemibeamError, ValueError):
    """Experiment configuration is missing, malformed or invalid.

    ``key`` names the offending entry when one can be identified.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
