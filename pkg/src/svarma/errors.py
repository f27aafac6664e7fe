"""Exception hierarchy shared by all modules."""


class SvarmaError(Exception):
    """Base class for every error raised by the package."""


class ContractError(SvarmaError, ValueError):
    """An input violates a documented precondition."""


class SingularPolynomialError(SvarmaError):
    """The determinant of a matrix polynomial vanishes identically."""


class DomainError(SvarmaError, ValueError):
    """A polynomial is not stable / invertible where it has to be."""


class NotFactorizableError(SvarmaError):
    """An MA polynomial has a determinantal root on the unit circle."""


class NotNormalizableError(SvarmaError):
    """An identification scheme is undefined for the given matrix."""


class TieError(NotNormalizableError):
    """Two columns cannot be ordered because they compare equal."""


class SingularMatrixError(SvarmaError):
    """A matrix that must be inverted is (numerically) singular."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class RankDeficientError(SvarmaError):
    """A regression design matrix does not have full column rank."""


class BootstrapError(SvarmaError):
    """Too many bootstrap replicates failed."""
