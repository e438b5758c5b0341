"""Exception hierarchy for the emkrylov package."""


class EmKrylovError(Exception):
    """Base class for all package errors."""


class ParameterError(EmKrylovError, ValueError):
    """Invalid parameter value (bad range, nonpositive geometry, ...)."""


class TreeFormatError(EmKrylovError, ValueError):
    """Syntax error in a tree file. Carries line and column of the offense."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class TreeValidationError(EmKrylovError, ValueError):
    """Semantic error in a tree: cycles, dangling ids, bad geometry."""


class DegenerateInputError(EmKrylovError, ValueError):
    """A solver received an input that makes the problem degenerate (zero seed)."""


class NumericalError(EmKrylovError, RuntimeError):
    """Numerical failure: singular operator, non-finite values, ..."""


class ConservationViolationError(NumericalError):
    """A singular-system solve was requested for a right-hand side outside range(A)."""


class ConfigurationError(EmKrylovError, ValueError):
    """Inconsistent run or tuner configuration."""


class SearchFailureError(EmKrylovError, RuntimeError):
    """The tuner exhausted its budget without a feasible configuration."""
