"""Exception hierarchy shared across the package."""


class MacmError(Exception):
    """Base class for all package errors."""


class ParseFailure(MacmError):
    """An agent reply could not be parsed after all format retries."""


class BackendFailure(MacmError):
    """Transport, auth, or HTTP error from a chat backend after retries."""


class BudgetExceeded(MacmError):
    """The per-run query cap was hit."""


class ScriptExhausted(MacmError):
    """A scripted reply queue was consumed past its end."""


class ScriptMismatch(MacmError):
    """A scripted entry's expected-prompt-substring assertion failed."""


class CassetteMismatch(MacmError):
    """A replayed request did not match the recorded one."""


class CassetteExhausted(MacmError):
    """More calls were replayed than the cassette holds."""


class CorruptTranscript(MacmError):
    """A transcript cannot be resumed (already finalized or inconsistent)."""


class SchemaError(MacmError):
    """A dataset line failed schema validation."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EmptyDataset(MacmError):
    """An operation requiring problems received none."""


class ExprSyntaxError(MacmError):
    """Arithmetic expression failed to parse."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class DivisionByZero(MacmError):
    """Exact evaluation hit a zero denominator."""
