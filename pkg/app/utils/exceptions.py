from typing import Optional


class NNTPError(Exception):
    """Base error for every failure raised by the prediction pipeline.

    `stage` is filled in by the CLI wrapper when the error crosses a command
    stage, so the same exception type can be reported as `[weekly] ...` or
    `[pulse] ...` depending on where it surfaced.
    """

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        return self.message


class ArgumentError(NNTPError, ValueError):
    pass


class RangeError(NNTPError, ValueError):
    pass


class FormatError(NNTPError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, stage: Optional[str] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, stage=stage)
        self.line = line


class AlignmentError(NNTPError, ValueError):
    pass


class InsufficientDataError(NNTPError):
    pass


class DegeneracyError(NNTPError):
    pass


class DegenerateVarianceError(NNTPError):
    pass


class OrderingError(NNTPError):
    pass


class SelectionError(NNTPError):
    pass


class EmptySelectionError(NNTPError):
    pass


class VersionError(FormatError):
    pass
