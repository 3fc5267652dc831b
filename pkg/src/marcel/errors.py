"""Exception types raised across the package."""


class MarcelError(Exception):
    """Base class for all package errors."""


class EmptyEnsemble(MarcelError, ValueError):
    pass


class InvalidEnergy(MarcelError, ValueError):
    pass


class ShapeMismatch(MarcelError, ValueError):
    pass


class InvalidArgument(MarcelError, ValueError):
    pass


class ParseError(MarcelError, ValueError):
    """Malformed structure file. ``line`` is 1-based within the input, when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingProperty(MarcelError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DataError(MarcelError, ValueError):
    pass


class NonFiniteGradient(MarcelError, FloatingPointError):
    pass


class DatasetTooSmall(MarcelError, ValueError):
    pass


class IoError(MarcelError, OSError):
    pass
