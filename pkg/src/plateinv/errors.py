"""Exception hierarchy shared by all modules.

Two families exist so the command line can map failures to exit codes:
``InputError`` covers bad arguments and configurations, ``NumericalError``
covers failures that happen while a well-formed problem is being solved.
"""


class PlateError(Exception):
    """Base class for every error raised by :mod:`plateinv`."""


class InputError(PlateError, ValueError):
    """An argument violates a documented precondition."""


class GridMismatchError(InputError):
    """Two fields or masks that must share a voxel grid do not."""


class SingularityError(InputError):
    """A kernel was evaluated at its singular point."""


class GeometryError(InputError):
    """Evaluation points lie where the representation is not valid."""


class NumericalError(PlateError, ArithmeticError):
    """A numerical stage failed on a well-formed problem."""


class BoundViolationError(NumericalError):
    """The Neumann-series sufficient bound does not hold; use the dense solver."""


class DivergenceError(NumericalError):
    """An iteration did not converge within its term budget."""


class ConditioningError(NumericalError):
    """A linear system or fit is too ill-conditioned to be trusted."""


class IllPosedError(NumericalError):
    """A recovery precondition (e.g. a nonvanishing mass) fails."""


class ConsistencyError(NumericalError):
    """A recovered quantity violates a physical constraint."""


class TruncationError(NumericalError):
    """A truncated expansion cannot meet its tolerance at the given order."""

    def __init__(self, message, required_order=None):
        super().__init__(message)
        self.required_order = required_order
