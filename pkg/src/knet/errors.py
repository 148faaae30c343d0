"""Exception types raised across the package."""


class KNetError(Exception):
    """Base class for every error raised by knet."""


class ShapeError(KNetError, ValueError):
    pass


class ParameterError(KNetError, ValueError):
    pass


class InputValidationError(KNetError, ValueError):
    pass


class DegeneracyError(KNetError, ArithmeticError):
    pass


class StepFailureError(KNetError, ArithmeticError):
    """The Cayley system matrix was singular for the requested step length."""


class PretrainingError(KNetError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(KNetError, RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class PreprocessingError(KNetError, ValueError):
    pass


class DataFormatError(KNetError, ValueError):
    """CSV content could not be parsed; carries the offending row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
