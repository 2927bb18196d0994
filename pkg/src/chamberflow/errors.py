"""Exception types shared across the package."""


class ChamberflowError(Exception):
    """Base class for all package errors."""


class CatalogError(ChamberflowError):
    """Malformed catalog data, unknown names, or inconsistent root data."""


class DomainError(ChamberflowError, ValueError):
    """A point lies on or outside the open domain of a closed-form quantity.

    ``constraint`` names the violated wall (or curvature-family entry) and
    ``margin`` is its signed distance in functional units.
    """

    def __init__(self, message, constraint=None, margin=None):
        super().__init__(message)
        self.constraint = constraint
        self.margin = margin


class InvariantError(ChamberflowError):
    """A numerical invariant that the theory guarantees did not hold."""


class ConvergenceError(ChamberflowError):
    """An iterative solver failed to converge."""


class IntegrationError(ChamberflowError):
    """The ODE integrator could not continue (step-size underflow and the like)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedCollapse(ChamberflowError):
    """Type-I estimation requested for a corner (codimension >= 2) collapse."""
