"""Exception hierarchy shared by every module in the package."""


class PmbcError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PmbcError, ValueError):
    """A numeric parameter is outside its valid range."""


class DomainError(PmbcError, ValueError):
    """An input value is outside the domain of the operation (empty, non-finite)."""


class ShapeError(PmbcError, ValueError):
    """Array shapes or lengths are inconsistent."""


class UnsupportedModeError(PmbcError, ValueError):
    """The requested reset mode has no parallel decomposition."""


class InvariantError(PmbcError, RuntimeError):
    """An internal consistency check failed (e.g. lower bound above upper bound)."""


class ConfigError(PmbcError, ValueError):
    """A configuration document is malformed or contains unknown keys."""


class ValidationError(PmbcError, ValueError):
    """User-supplied statistics (rates, op counts) are out of range."""
