"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class QmigtaxError(Exception):
    """Base class for all errors raised by qmigtax."""


class InvalidInputError(QmigtaxError, ValueError):
    pass


class InvalidSchemaError(InvalidInputError):
    pass


class ConfigError(QmigtaxError):
    pass


class TransportError(QmigtaxError):
    def __init__(self, message: str, *, retryable: bool = True) -> None:
        super().__init__(message)
        self.retryable = retryable


class UnknownVersionError(QmigtaxError):
    pass


class ExtractionError(QmigtaxError):
    pass


class ContextExceededError(QmigtaxError):
    def __init__(self, required: int, available: int) -> None:
        self.required = required
        self.available = available
        self.deficit = required - available
        super().__init__(
            f"prompt needs {required} tokens but the context window holds {available} "
            f"(over by {self.deficit})"
        )


class EmptyResponseError(QmigtaxError):
    pass


class ReplayError(QmigtaxError):
    pass


class NoTableError(QmigtaxError):
    pass


class RecordError(QmigtaxError):
    pass


class SchemaVersionError(RecordError):
    pass


class SerializationError(QmigtaxError):
    def __init__(self, message: str, violations=()) -> None:
        super().__init__(message)
        self.violations = list(violations)


class MergeError(QmigtaxError):
    pass


class FlowMismatchError(QmigtaxError):
    pass
