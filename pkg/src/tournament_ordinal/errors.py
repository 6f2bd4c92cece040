"""Exception hierarchy. Each family maps onto one CLI exit code."""


class TournamentError(Exception):
    exit_code = 1


class ConfigError(TournamentError, ValueError):
    exit_code = 1


class DataError(TournamentError, ValueError):
    """Bad input data: parse failures, out-of-range values, shape mismatches."""

    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(DataError):
    pass


class DomainError(DataError):
    pass


class NumericError(DataError):
    pass


class UndefinedAUCError(DomainError):
    """AUC requested on labels that contain only one class."""


class BuildError(TournamentError, RuntimeError):
    exit_code = 3

    def __init__(self, message, classes=None):
        if classes is not None:
            message = f"class set [{classes[0]}, {classes[1]}]: {message}"
        super().__init__(message)
        self.classes = classes


class TrainingError(BuildError):
    """Optimization failed, e.g. SGD diverged."""
