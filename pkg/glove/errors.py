from __future__ import annotations

from typing import Optional


class GloveError(Exception):
    """Base class for every error the pipeline raises on purpose."""

    kind = "data"
    exit_code = 2


class DataError(GloveError):
    kind = "data"
    exit_code = 2


class NumericalError(GloveError):
    kind = "numerical"
    exit_code = 3


class MalformedRow(DataError):
    def __init__(self, path: str, row_index: int, line: int, detail: str = "") -> None:
        self.path = path
        self.row_index = row_index
        self.line = line
        msg = f"{path}: row {row_index} (line {line}) is not numeric"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TooFewColumns(DataError):
    def __init__(self, path: str, row_index: int, found: int, required: int = 5) -> None:
        self.path = path
        self.row_index = row_index
        self.found = found
        super().__init__(f"{path}: row {row_index} has {found} columns, need {required}")


class EmptyFile(DataError):
    pass


class AllRowsRemoved(DataError):
    pass


class InsufficientClassData(DataError):
    pass


class UnknownLabel(DataError):
    pass


class NotFitted(DataError):
    pass


class SequenceTooShort(DataError):
    def __init__(self, length: int, required: int) -> None:
        self.length = length
        self.required = required
        super().__init__(f"sequence of length {length} is shorter than {required}")


class DegenerateFilter(DataError):
    pass


class NonMonotoneWarp(NumericalError):
    pass


class ShapeMismatch(DataError):
    def __init__(self, what: str, expected: object, got: Optional[object] = None) -> None:
        msg = f"{what}: expected {expected}"
        if got is not None:
            msg += f", got {got}"
        super().__init__(msg)


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch: int, batch: int, value: float) -> None:
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"loss became {value} at epoch {epoch}, batch {batch}")


class FingerprintMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class ContainerFormatError(DataError):
    pass


class MissingArtifact(DataError):
    pass


class StaleArtifact(DataError):
    pass


__all__ = [
    "GloveError",
    "DataError",
    "NumericalError",
    "MalformedRow",
    "TooFewColumns",
    "EmptyFile",
    "AllRowsRemoved",
    "InsufficientClassData",
    "UnknownLabel",
    "NotFitted",
    "SequenceTooShort",
    "DegenerateFilter",
    "NonMonotoneWarp",
    "ShapeMismatch",
    "NonFiniteLoss",
    "FingerprintMismatch",
    "LengthMismatch",
    "EmptyMatrix",
    "ContainerFormatError",
    "MissingArtifact",
    "StaleArtifact",
]
