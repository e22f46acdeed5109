"""Exception hierarchy shared by every evoasym module."""


class EvoAsymError(Exception):
    """Base class for all errors raised by evoasym."""


class InvalidInputError(EvoAsymError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionMismatchError(InvalidInputError):
    """State vectors or systems of different dimension were mixed."""


class InsufficientDataError(EvoAsymError, ValueError):
    """Too few samples fall inside the requested window."""


class MultivaluedError(EvoAsymError, ValueError):
    """An operator is not single-valued (or not defined) at the query point."""


class NoConvergenceError(EvoAsymError, RuntimeError):
    """An iterative inner solver hit its iteration cap."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class ScenarioError(EvoAsymError):
    """A scenario document is malformed or references undeclared entities."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column
