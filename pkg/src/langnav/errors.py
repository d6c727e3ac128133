"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LangNavError(Exception):
    """Base class for all package errors."""


class ContractViolation(LangNavError, ValueError):
    """A caller broke an operation's precondition."""


class ConfigError(LangNavError):
    """Invalid or missing configuration."""


class WorldFormatError(LangNavError):
    """A world file could not be parsed.

    ``line`` and ``column`` are 1-based positions inside the offending grid
    when the problem is cell-level.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class SuiteError(LangNavError):
    """A suite directory is malformed or an episode is inconsistent."""


class GenerationError(SuiteError):
    def __init__(self, split: str, message: str):
        self.split = split
        super().__init__(f"split {split}: {message}")


class MetricError(LangNavError):
    pass


class ReasoningError(LangNavError):
    """Tree search failed; ``partial`` holds the state sets built so far."""

    def __init__(self, message: str, partial: list | None = None):
        self.partial = partial or []
        super().__init__(message)


class ParseError(LangNavError):
    """A model reply did not contain a usable conclusion."""

    def __init__(self, message: str, text: str = ""):
        self.text = text
        super().__init__(message)


class BackendError(LangNavError):
    """Something went wrong inside a completion backend."""


class ScriptError(BackendError):
    pass


class OracleError(BackendError):
    pass


class ApiError(BackendError):
    """Non-retryable HTTP error (4xx other than 429)."""

    def __init__(self, message: str, status: int, request_id: str):
        self.status = status
        self.request_id = request_id
        super().__init__(f"{message} (status {status}, request {request_id})")


class TransportError(BackendError):
    """Retries exhausted, timeout, or connection failure."""

    def __init__(self, message: str, request_id: str):
        self.request_id = request_id
        super().__init__(f"{message} (request {request_id})")
