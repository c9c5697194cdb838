"""Exception types raised by the numerical routines."""


class ShapingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDistributionError(ShapingError, ValueError):
    """A pmf or channel row is negative or too far from normalized."""


class InfeasibleConstraintError(ShapingError, ValueError):
    """No pmf on the (support of the) alphabet satisfies the constraint set."""


class NotApplicableError(ShapingError, ValueError):
    """The modified joint-typicality bound does not apply to this input/channel."""


class ConvergenceError(ShapingError, ArithmeticError):
    """An iterative solver hit its iteration cap.

    ``residual`` holds the last residual (scalar or tuple) so callers can
    decide whether the partial answer is usable.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapExceededError(ShapingError, ValueError):
    """A Monte Carlo configuration would enumerate more words than allowed."""
