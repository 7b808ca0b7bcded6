"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
PlannerError -> 4.
"""


class BathyplanError(Exception):
    pass


class ConfigError(BathyplanError):
    """Bad or inconsistent run configuration."""


class DataError(BathyplanError):
    """Unreadable or malformed input data."""


class PlannerError(BathyplanError):
    """A planner could not produce a path."""


class GridFormatError(DataError):
    """Malformed ASCII grid; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
