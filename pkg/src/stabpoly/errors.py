"""Exception hierarchy shared by all stabpoly modules."""


class StabPolyError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(StabPolyError, ValueError):
    """A numeric argument is outside its documented domain."""


class InvalidInputError(StabPolyError, ValueError):
    """Input data (a spectrum, a file) is empty or malformed."""


class FormatError(InvalidInputError):
    """A spectrum or polynomial file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidStateError(StabPolyError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class RankDeficientError(StabPolyError, ArithmeticError):
    """The order-condition equality system lost full row rank."""

    def __init__(self, message, rank=None, singular_values=None):
        self.rank = rank
        self.singular_values = singular_values
        super().__init__(message)


class SolverError(StabPolyError, RuntimeError):
    """The inner least-deviation solve failed beyond recovery."""

    def __init__(self, message, h=None, diagnostics=None):
        self.h = h
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class InfeasibleInputError(StabPolyError, ValueError):
    """No polynomial can satisfy the request, even in the limiting case."""
