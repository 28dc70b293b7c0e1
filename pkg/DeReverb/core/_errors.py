#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.


class DereverbError(Exception):
    """Base error carrying the CLI exit code it maps to."""

    code: int = 2

    def __init__(self, message: str, code: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code

    def __repr__(self) -> str:
        return f"{type(self).__name__}(code={self.code}, message={self.message!r})"


class UsageError(DereverbError):
    code = 1


class UnknownModelError(UsageError):
    pass


class DataError(DereverbError):
    code = 2


class InvalidSignalError(DataError):
    pass


class ShapeMismatchError(DataError):
    pass


class WavFormatError(DataError):
    pass


class UnachievableT60Error(DataError):
    pass


class DecayRangeError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class CheckpointError(DataError):
    pass


class MetricError(DataError):
    pass


class NumericError(DereverbError):
    code = 3


class TrainingDivergedError(NumericError):
    pass
