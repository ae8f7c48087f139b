"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so anything user-facing should raise
one of them rather than a bare ValueError.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EngineError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(EngineError):
    """An elementwise operation was fed a value outside its math domain
    (e.g. log of a non-positive number)."""


class NumericError(EngineError):
    """A computation produced a non-finite value."""


class ConfigError(EngineError):
    """Invalid configuration value or unknown configuration key."""


class DataError(EngineError):
    """Invalid data fed to an operation (bad label, negative hardness, ...)."""


class StateError(EngineError):
    """An operation was called in a state that does not permit it."""


class ParseError(EngineError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class EmptyInputError(EngineError):
    """An operation received an empty tensor or batch."""
