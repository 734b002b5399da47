"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
anything else -> 3.
"""


class FairflowError(Exception):
    """Base class for all toolkit errors."""


class UsageError(FairflowError):
    """Bad arguments or an invalid configuration."""


class DataError(FairflowError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class SolverStuckError(FairflowError):
    """The flow solver exceeded its operation budget (internal bug guard)."""
