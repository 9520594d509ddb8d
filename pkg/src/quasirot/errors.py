"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class QuasirotError(Exception):
    exit_code = 1


class UsageError(QuasirotError, ValueError):
    """Bad arguments: wrong lengths, out-of-range parameters, empty input."""


class DomainError(UsageError):
    """Non-finite input where a finite real is required."""


class ConfigurationError(UsageError):
    """Inconsistent configuration, e.g. a delay count too small to embed."""


class DegeneratePointError(QuasirotError):
    """Reference point coincides with (or lies on) the observed curve."""


class UndersampledError(QuasirotError):
    """Consecutive samples are too far apart to resolve the angle increment."""


class IncompleteLiftError(UsageError):
    """Continuation left indices unassigned; the rate is undefined."""

    exit_code = 2


class LiftAmbiguityError(QuasirotError):
    """Two accepted matches disagree on the integer offset (delta is not below the separation)."""

    exit_code = 3

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class WindingRefusal(QuasirotError):
    exit_code = 4

    def __init__(self, message, winding=None):
        super().__init__(message)
        self.winding = winding


class DataFormatError(QuasirotError):
    """Malformed or unreadable observation / configuration file."""

    exit_code = 5


class CollisionError(QuasirotError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
