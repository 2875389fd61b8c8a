"""Exception types shared across the toolkit, plus the CLI exit-code map."""


class TrajclustError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TrajclustError):
    """An input file is malformed; carries the offending line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
        if line is not None:
            prefix = f"{prefix}{line}:"
        if prefix:
            message = f"{prefix} {message}"
        super().__init__(message)


class ValidationError(TrajclustError):
    """An input or argument violates a documented invariant."""


class GenerationError(TrajclustError):
    """Synthetic dataset generation could not satisfy its constraints."""


class AuditError(TrajclustError):
    """Incremental bookkeeping diverged from a from-scratch recomputation."""


# CLI exit codes.
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3
