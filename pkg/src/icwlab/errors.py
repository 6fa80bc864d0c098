"""Exception types raised across the package."""


class ICWError(Exception):
    """Base class for all package errors."""


class DimensionError(ICWError, ValueError):
    pass


class SizeError(ICWError, ValueError):
    pass


class RepresentationError(ICWError, ValueError):
    """Weights lack the integer scale needed by the lattice computation."""


class RegimeError(ICWError, ValueError):
    """Parameters lie outside the uniqueness regime.

    ``beta_c`` carries the critical inverse temperature so callers can report it.
    """

    def __init__(self, message, beta_c=None):
        super().__init__(message)
        self.beta_c = beta_c


class SolverError(ICWError, ArithmeticError):
    pass


class DegeneracyError(ICWError, ArithmeticError):
    """Curvature at the fixed point is too small (near-critical parameters)."""


class QuadratureError(ICWError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
