from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ._types import RunLog


class LcnnGanException(Exception): ...


class ShapeError(LcnnGanException): ...


class ParameterError(LcnnGanException): ...


class NumericalError(LcnnGanException): ...


class FormatError(LcnnGanException):
    path: str | None = None


class IdxFormatError(FormatError): ...


class IdxMagicError(IdxFormatError): ...


class IdxTruncatedError(IdxFormatError): ...


class IdxCountMismatchError(IdxFormatError): ...


class CheckpointFormatError(FormatError):
    line: int | None = None


class TrainingAbortedError(LcnnGanException):
    def __init__(self, message: str, *, step: int, term: str, log: "RunLog") -> None:
        super().__init__(message)
        self.step = step
        self.term = term
        self.log = log
