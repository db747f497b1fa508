"""Exception hierarchy shared by all modules."""


class AGPError(Exception):
    """Base class for all package errors."""


class AliasError(AGPError):
    """Quadrature grid too coarse for the requested modes or scaling."""


class ShapeError(AGPError):
    """Array length does not match the grid or basis."""


class DimensionError(AGPError):
    """Operation not defined in this spatial dimension."""


class ModeError(AGPError):
    """Renormalization mode not allowed for this dimension."""


class RepresentationError(AGPError):
    """Field representation does not match the dimension."""


class BasisMismatch(AGPError):
    """Fields or forms live on different truncated bases."""


class ConvergenceError(AGPError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ZeroFieldError(AGPError):
    """Quotient or normalization requested on the zero field."""


class SignError(AGPError):
    """Quadratic part is not positive, so the Nehari scaling does not exist."""


class DivergenceError(AGPError):
    """Energy decreases without bound along the flow."""


class FrequencyError(AGPError):
    """Frequency at or below the bottom of the spectrum."""


class CriticalityError(AGPError):
    """Exponent is not the mass-critical one."""


class InsufficientNodes(AGPError):
    """Too few admissible nodes for a fit."""
