"""Bakry-Emery geometry toolkit for Lorentzian spacetimes."""

__version__ = "0.1.0"

from .expr import DomainError, Expression, ExprSyntaxError, UnknownIdentifierError, eval_jet, parse_expr
from .spacetime import (
    BUILTINS,
    SignatureError,
    SpacetimeModel,
    SyntheticDimension,
    TangentVector,
    build_spacetime,
    conformal_rescale,
    metric_at,
    validate_signature,
)
from .curvature import CurvatureBundle, bakry_emery_at, bakry_emery_tensor, cd_check, curvature_at
from .geodesic import (
    ConnectionKind,
    GeodesicPath,
    integrate_geodesic,
    lift_twisted_geodesic,
    parallel_transport,
    reparametrize,
    verify_reparametrization,
)
from .congruence import (
    detect_conjugate,
    focusing_bound_check,
    index_form,
    propagate_jacobi,
    raychaudhuri_residual,
    transform_jacobi,
)
from .hypersurface import laplacian_comparison_check, make_surface, shape_at, splitting_diagnostics, trapped_check
