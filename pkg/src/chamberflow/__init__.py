"""Gradient flows on Weyl-chamber polytopes of rank-2 Hermann actions."""

from .errors import (CatalogError, ChamberflowError, ConvergenceError, DomainError, IntegrationError,
                     InvariantError, UnsupportedCollapse)
from .flow import (CascadeResult, CollapseEvent, FixedPoint, FlowOptions, Timeout, Trajectory,
                   backward_trace, cascade, integrate, minimal_point, stratum_field, type_I_estimate)
from .meanfield import (CurvatureFamily, SpectrumEntry, gradient_rho, hessian_rho, lift_family,
                        lift_mean_curvature, lift_principal_curvatures, lifted_spectrum_arctan,
                        orbit_shape_spectrum, potential_rho, regularized_trace, vector_field_X)
from .rootsys import (ActionSpec, Chamber, MarkedRoot, Stratum, catalog, chamber, get_spec,
                      load_catalog, strata)

__all__ = [
    "ActionSpec", "CascadeResult", "CatalogError", "Chamber", "ChamberflowError", "CollapseEvent",
    "ConvergenceError", "CurvatureFamily", "DomainError", "FixedPoint", "FlowOptions",
    "IntegrationError", "InvariantError", "MarkedRoot", "SpectrumEntry", "Stratum", "Timeout",
    "Trajectory", "UnsupportedCollapse", "backward_trace", "cascade", "catalog", "chamber",
    "get_spec", "gradient_rho", "hessian_rho", "integrate", "lift_family", "lift_mean_curvature",
    "lift_principal_curvatures", "lifted_spectrum_arctan", "load_catalog", "minimal_point",
    "orbit_shape_spectrum", "potential_rho", "regularized_trace", "strata", "stratum_field",
    "type_I_estimate", "vector_field_X",
]
