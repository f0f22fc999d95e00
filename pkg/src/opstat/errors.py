class OpstatError(Exception):
    """Base class for library errors."""


class ValidationError(OpstatError, ValueError):
    """Input violates a structural invariant (shape, symmetry, partition...)."""


class DomainError(ValidationError):
    """A scalar function is undefined on part of a spectrum."""


class NumericalError(OpstatError, ArithmeticError):
    """A numerical routine failed or produced an out-of-tolerance result.

    ``residual`` carries the offending norm when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
