"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration, shape mismatch, or malformed input file."""


class UsageError(RuntimeError):
    """API misuse, e.g. stepping a finished episode."""


class TeacherUnavailableError(RuntimeError):
    """Remote teacher unreachable after retries."""


class ProtocolError(RuntimeError):
    """Teacher endpoint answered with a malformed or rejected response."""


class NumericalFailureError(ArithmeticError):
    """A loss term or network output became NaN/Inf.

    Carries the name of the offending term.
    """

    def __init__(self, term: str, message: str = ""):
        self.term = term
        super().__init__(message or f"non-finite value in {term}")
