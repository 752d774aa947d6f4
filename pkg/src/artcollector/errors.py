"""Exception types shared across modules.

Anything deriving from :class:`NumericError` maps to CLI exit status 3.
"""


class NumericError(ArithmeticError):
    pass


class QuadratureError(NumericError):
    pass


class StateCollapseError(NumericError):
    """Raised when the state hits exactly (0, 0)."""


class ConvergenceError(NumericError):
    def __init__(self, message, estimate=None, trailing=None):
        super().__init__(message)
        self.estimate = estimate
        self.trailing = trailing


class QuadratureWarning(RuntimeWarning):
    pass
