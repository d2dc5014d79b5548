"""The exceptions raised by the sensing pipeline and their CLI exit codes."""

from typing import Optional


class SpuError(Exception):
    """Base class of every error raised on purpose by this package."""

    exit_code = 1


class InvalidInputError(SpuError, ValueError):
    """An operation was called with arguments outside its preconditions."""

    exit_code = 3


class DimensionMismatchError(InvalidInputError):
    """Two grids, channels or periodograms that must share a shape do not."""

    def __init__(self, what: str, expected: tuple, actual: tuple):
        super().__init__(f"{what}: expected shape {expected}, got {actual}.")
        self.expected = expected
        self.actual = actual


class ScenarioError(InvalidInputError):
    """A scenario file could not be parsed or did not validate."""

    def __init__(self, message: str, *, line: Optional[int] = None, field: Optional[str] = None):
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.field = field


class SingularInnovationError(SpuError, ArithmeticError):
    """The innovation covariance of a Kalman update is numerically singular."""

    exit_code = 3


class FileFormatError(SpuError):
    """A frame, periodogram or JSON-lines file is missing, truncated or corrupt."""

    exit_code = 2

    def __init__(self, path: object, reason: str, *, line: Optional[int] = None):
        location = f":{line}" if line is not None else ""
        super().__init__(f"{path}{location}: {reason}")
        self.path = path
        self.line = line
