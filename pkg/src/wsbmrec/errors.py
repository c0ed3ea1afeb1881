"""Exception hierarchy.

Each error carries the CLI exit code it maps to: 2 for I/O, 3 for
validation, 4 for numerical failure.
"""


class WsbmrecError(Exception):
    exit_code = 1


class DataIOError(WsbmrecError, OSError):
    exit_code = 2


class ValidationError(WsbmrecError, ValueError):
    exit_code = 3


class ParseError(ValidationError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class DimensionError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class EmptyVocabularyError(DegenerateInputError):
    pass


class DomainError(ValidationError):
    pass


class CoverageError(ValidationError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"no labeled comments for score(s) {self.missing}")


class DegenerateCentroidError(DegenerateInputError):
    pass


class NumericalError(WsbmrecError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class SelectionError(NumericalError):
    pass


class UndefinedMetricError(ValidationError):
    pass


class ColdStartError(WsbmrecError, LookupError):
    """Raised when a user or item has no history on the requested path."""

    exit_code = 3


class UnknownUserError(ColdStartError):
    pass


class UnpredictableError(ColdStartError):
    """Neither the content nor the collaborative component is available."""
