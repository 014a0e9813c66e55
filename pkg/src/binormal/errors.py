"""Exception types shared across the package.

The CLI maps ``ValidationError`` subclasses to exit code 2 and everything
else deriving from ``BinormalError`` to exit code 3.
"""


class BinormalError(Exception):
    """Base class for all package errors."""


class ValidationError(BinormalError, ValueError):
    """Input outside the documented parameter range."""


class DomainError(ValidationError):
    """Argument outside the domain of a closed-form relation."""


class AdmissibilityError(ValidationError):
    """No admissible time exists for the requested (theta, n)."""

    def __init__(self, message, required_n=None):
        super().__init__(message)
        self.required_n = required_n


class RefinementError(BinormalError):
    """A grid or step size is too coarse for the oscillation it must resolve."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class IntegrationError(BinormalError):
    """An ODE march could not reach its target."""

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class ConvergenceError(BinormalError):
    """An extrapolation or limit extraction did not settle."""
