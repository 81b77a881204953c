"""Exception types shared across the package and mapped to CLI exit codes."""


class RsvolError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(RsvolError):
    exit_code = 2


class DataError(RsvolError):
    exit_code = 3


class NumericalError(RsvolError):
    """Raised when a chain produces a non-finite log density or parameter."""

    exit_code = 4

    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = state or {}
