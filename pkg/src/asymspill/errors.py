"""Exception hierarchy.

Each family maps onto a CLI exit code: validation 2, data 3, numerical 4.
"""


class AsymSpillError(Exception):
    exit_code = 1


class ValidationError(AsymSpillError):
    """Bad configuration or arguments, detected before any computation."""

    exit_code = 2


class DataError(AsymSpillError):
    """Input data violates a precondition (non-positive price, bad alignment...)."""

    exit_code = 3


class ParseError(DataError):
    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class AlignmentError(DataError):
    pass


class NumericalError(AsymSpillError):
    exit_code = 4


class SingularFitError(NumericalError):
    def __init__(self, message, window_start=None):
        self.window_start = window_start
        if window_start is not None:
            message = f"{message} (window starting {window_start})"
        super().__init__(message)


class DegenerateCovarianceError(NumericalError):
    pass
