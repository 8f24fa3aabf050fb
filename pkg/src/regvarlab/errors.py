"""Exception types raised across the package."""


class RegvarError(Exception):
    """Base class for all package errors."""


class DomainError(RegvarError, ValueError):
    pass


class QuadratureFailure(RegvarError, RuntimeError):
    pass


class InvalidDelta(RegvarError, ValueError):
    pass


class InvalidGrid(RegvarError, ValueError):
    pass


class NotFound(RegvarError, LookupError):
    pass


class InvalidProfile(RegvarError, ValueError):
    pass


class TailDivergence(RegvarError, ArithmeticError):
    pass


class UnboundedField(RegvarError, ValueError):
    pass


class EmptyFamily(RegvarError, ValueError):
    pass


class NoContactPoint(RegvarError, LookupError):
    pass


class NonMonotoneStencil(RegvarError, ValueError):
    pass


class NotConverged(RegvarError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None, solution=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.solution = solution
