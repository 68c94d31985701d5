"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes or factor dimensions do not fit together."""


class ValidationError(ValueError):
    """An operator violates a structural requirement (unitary, Hermitian, ...)."""


class PreconditionError(ValueError):
    """Input is outside the domain of an operation.

    ``violation`` carries the measured size of the violation when available.
    """

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class NumericalError(ArithmeticError):
    """A decomposition did not converge or failed its residual check."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
