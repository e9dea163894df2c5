from typing import List, Optional, Tuple


class PipelineError(Exception):
    exit_code = 1


class ArgumentError(PipelineError, ValueError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str) -> None:
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column '{column}': cannot parse {value!r} as a number")


class SequencingError(DataError):
    pass


class RangeError(DataError):
    pass


class FormatError(DataError):
    pass


class MissingChannelError(DataError):
    pass


class GeometryError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class CatalogError(DataError):
    pass


class AlignmentError(DataError):
    def __init__(self, message: str, ranges: Optional[List[Tuple[int, int]]] = None) -> None:
        self.ranges = ranges or []
        if self.ranges:
            spans = ", ".join(f"{start}-{end}" for start, end in self.ranges)
            message = f"{message} (offending frames: {spans})"
        super().__init__(message)


class ShapeError(DataError):
    pass


class CheckpointError(DataError):
    pass


class NumericError(PipelineError):
    exit_code = 4


class DivergenceError(NumericError):
    def __init__(self, epoch: int) -> None:
        self.epoch = epoch
        super().__init__(f"training diverged: loss is not finite at epoch {epoch}")


class UndefinedStatisticError(NumericError):
    pass
