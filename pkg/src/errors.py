"""
Exception hierarchy shared by the estimation pipeline.

Library code raises these; the bench harness and the command line catch them,
log them and decide whether to continue or which exit code to return.
"""


class DancoError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"
    exit_code = 1


class ParameterError(DancoError, ValueError):
    """A caller supplied an argument outside the documented range."""

    kind = "parameter"
    exit_code = 2


class UnknownGeneratorError(ParameterError):
    kind = "parameter"


class InputError(DancoError):
    """Input files could not be turned into a data matrix."""

    kind = "input"
    exit_code = 3


class EmptyInputError(InputError):
    pass


class NonNumericCellError(InputError):
    def __init__(self, message, line_number=None, column=None):
        super().__init__(message)
        self.line_number = line_number
        self.column = column


class RaggedRowError(InputError):
    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class DataError(DancoError):
    """The data matrix cannot support the requested statistic."""

    kind = "data"
    exit_code = 4


class DegenerateGeometryError(DataError):
    def __init__(self, message, point_index=None):
        super().__init__(message)
        self.point_index = point_index


class DuplicatePointsError(DegenerateGeometryError):
    pass


class NumericError(DancoError):
    kind = "numeric"
    exit_code = 4


class NumericInstabilityError(NumericError):
    pass


class ScalingRegionError(NumericError):
    pass


class CalibrationError(DancoError):
    kind = "calibration"
    exit_code = 5


class CalibrationVersionError(CalibrationError):
    pass


class CalibrationCorruptError(CalibrationError):
    pass


class CalibrationInvariantError(CalibrationError):
    pass


class CalibrationMismatchError(CalibrationError):
    pass
