"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2.
"""


class PipelineError(Exception):
    """Base class for failures this package raises deliberately."""


class UsageError(PipelineError):
    """Bad configuration, flags, or incompatible artifacts."""


class GridMismatchError(UsageError):
    """Two artifacts that must share a grid do not."""


class DataError(PipelineError):
    """Defective input data."""


class NoDataError(DataError):
    """An operation that needs at least one observation got none."""


class FieldFormatError(DataError):
    """A field file does not follow the expected layout."""


class ParseError(DataError):
    """A trajectory record could not be parsed.

    Carries the 1-based line number (and optionally the file path) so
    callers can report or skip the offending row.
    """

    def __init__(self, message: str, line_number: int | None = None, path: str | None = None):
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_number is not None:
            where += f"line {line_number}: "
        super().__init__(where + message)
