"""Spectral half-space Stokes / shear-dependent-flow laboratory."""

from .fields import (
    BoundaryField,
    Grid,
    SpaceTimeField,
    SpatialField,
    divergence,
    divergence_spatial,
    frobenius_norm_field,
    outer_product,
    symmetric_gradient,
    tensor_divergence,
)
from .spectral import (
    FullField,
    LPFamily,
    build_lp_family,
    half_time_derivative,
    helmholtz_project,
    lp_block,
    riesz_transform,
)
from .besov import (
    BesovProfile,
    a_norm_endpoints,
    besov_norm,
    besov_norm_integral,
    canonical_extension,
    extend_halfspace,
    extend_time,
    extension_coefficients,
    sobolev_aniso_norm,
    spatial_besov_norm,
    trace_boundary,
    trace_time0,
)
from .kernels import (
    duhamel_forcing,
    heat_evolve,
    heat_evolve_series,
    layer_potential_U,
    newton_potential,
    poisson_extend,
)
from .stress import (
    StressModel,
    besov_smallness_check,
    eval_stress,
    modulus_estimate,
    sigma_times,
)
from .stokes import (
    StokesProblem,
    StokesSolution,
    extend_initial_divfree,
    solve_stokes,
    weak_residual,
)
from .manufactured import exact_field, manufactured_grid, manufactured_problem

__version__ = "0.1.0"
