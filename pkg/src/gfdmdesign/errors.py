"""Exception hierarchy shared by all modules."""


class GfdmError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(GfdmError, ValueError):
    pass


class DomainError(GfdmError, ValueError):
    pass


class ConfigurationError(GfdmError, ValueError):
    pass


class DegenerateInputError(GfdmError, ValueError):
    pass


class NumericalError(GfdmError, ArithmeticError):
    """Raised when a linear receiver does not exist for the given inputs."""


class SingularFilterError(NumericalError):
    pass


class SingularChannelError(NumericalError):
    pass


class SingularEffectiveMatrixError(NumericalError):
    pass


class InfeasibleError(GfdmError):
    """Constrained design could not meet its constraint at tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
