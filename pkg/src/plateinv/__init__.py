"""Low-frequency inverse source problem for the time-harmonic plate equation."""

from .errors import (PlateError, InputError, NumericalError, GridMismatchError,
                     SingularityError, GeometryError, BoundViolationError,
                     DivergenceError, ConditioningError, IllPosedError,
                     ConsistencyError, TruncationError)

__version__ = "0.1.0"

__all__ = ["PlateError", "InputError", "NumericalError", "GridMismatchError",
           "SingularityError", "GeometryError", "BoundViolationError", "DivergenceError",
           "ConditioningError", "IllPosedError", "ConsistencyError", "TruncationError"]
