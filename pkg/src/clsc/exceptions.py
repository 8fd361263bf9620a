"""Exception hierarchy.

Every error raised on bad user input derives from :class:`ValidationError`
and every floating-point breakdown derives from :class:`NumericalError`, so
the command line can map them onto exit codes 1 and 2.
"""


class ClscError(Exception):
    """Base class for all package errors."""


class ValidationError(ClscError, ValueError):
    """Input does not satisfy a documented precondition."""


class NumericalError(ClscError, ArithmeticError):
    """A computation produced a non-finite or degenerate value."""


class DegenerateClampError(NumericalError):
    """Label propagation left a row with zero mass on all of its candidates."""

    def __init__(self, row, iteration):
        self.row = row
        self.iteration = iteration
        super().__init__(
            f"clamp denominator is zero for row {row} at iteration {iteration}: "
            "all candidate entries underflowed"
        )
