"""Exception hierarchy shared by every module of the toolkit."""


class TscharError(ValueError):
    """Base class for all input/validation errors raised by tschar."""


class FormatError(TscharError):
    def __init__(self, row, column, reason):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class EmptyDatasetError(TscharError):
    pass


class ConstantSeriesError(TscharError):
    pass


class TooShortError(TscharError):
    pass


class LagOutOfRangeError(TscharError):
    pass


class DegenerateScaleError(TscharError):
    pass


class LengthMismatchError(TscharError):
    pass


class WindowTooNarrowError(TscharError):
    pass


class NameMismatchError(TscharError):
    pass


class AllMissingError(TscharError):
    pass


class SubsequenceTooLongError(TscharError):
    pass


class SingleClassError(TscharError):
    pass


class InsufficientCandidatesError(TscharError):
    pass


class BadIntervalError(TscharError):
    pass


class IndivisibleError(TscharError):
    pass


class ParamMismatchError(TscharError):
    pass


class NoMembersError(TscharError):
    pass


class UnknownCommandError(TscharError):
    pass
