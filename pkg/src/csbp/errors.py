"""Exception types shared across the package."""


class CsbpError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(CsbpError, ValueError):
    """A parameter violates its documented constraints."""


class ShapeError(CsbpError, ValueError):
    """Vector / matrix dimensions do not match."""


class RangeError(CsbpError, ValueError):
    """A value falls outside the representable grid range."""


class SizeError(CsbpError, ValueError):
    """Problem size exceeds a hard cap (e.g. exhaustive enumeration)."""


class DegenerateMessageError(CsbpError, ArithmeticError):
    """A density collapsed to all-zero (or its weights underflowed)."""


class ParseError(CsbpError, ValueError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(CsbpError, ValueError):
    """An experiment configuration is invalid (CLI exit code 2)."""
