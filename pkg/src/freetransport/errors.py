"""Exception types raised across the package."""


class FreeTransportError(Exception):
    """Base class for all package errors."""


class MissingVariable(FreeTransportError):
    pass


class NormTooLarge(FreeTransportError):
    pass


class DomainError(FreeTransportError, ValueError):
    pass


class PreconditionFailed(FreeTransportError):
    pass


class NoConvergence(FreeTransportError):
    def __init__(self, message, last_ratio=None):
        super().__init__(message)
        self.last_ratio = last_ratio


class BasisTooLarge(FreeTransportError):
    pass


class DegreeExceedsDepth(FreeTransportError):
    pass


class SingularGram(FreeTransportError):
    pass


class WindowTooSmall(FreeTransportError):
    pass


class ConfigError(FreeTransportError):
    pass
