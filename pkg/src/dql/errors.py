"""Exception hierarchy shared by every dql module."""


class DQLError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(DQLError, ValueError):
    pass


class RangeError(DQLError, ValueError):
    pass


class DegenerateComponentError(DQLError):
    pass


class TruncationOverflowError(DQLError):
    """A uniform draw landed beyond F_T(t_cap); probability below 1e-9."""


class InternalConsistencyError(DQLError):
    pass


class DesynchronizationError(DQLError):
    """Decoder reproduced a different mixture index than the one transmitted."""


class ConfigurationError(DQLError):
    pass


class FrameError(DQLError):
    """Malformed or corrupted frame bytes."""


class TruncatedCodeError(FrameError):
    pass


class CountMismatchError(FrameError):
    pass
