"""Numerical lab for relative Yamabe constants of rotationally symmetric
metrics with minimal boundary, and their evolution under Ricci flow.

Layout: stencils and patch_geometry hold the finite-difference kernels,
warped the one-dimensional reduction of the geometry, cases the named
test geometries and exact shrinking families, yamabe the constrained
minimizer, flow the evolution, rate_checks the evolution-rate formula
and its cross checks, cli the experiment runner.
"""

from .cases import (
    CASE_BUILDERS,
    ShrinkingCap,
    ShrinkingCylinder,
    make_cylinder,
    make_hemisphere,
    make_perturbed_cylinder,
    make_truncated_cap,
)
from .flow import (
    FlowParams,
    FlowState,
    IntegratedFamily,
    SingularTimeError,
    Trajectory,
    advance_to,
    cfl_timestep,
    evolve,
    exact_solution,
    step_once,
    verify_flow_identities,
)
from .rate_checks import (
    FirstVariationReport,
    MonotonicityReport,
    RateFormulaReport,
    evolution_rate_terms,
    monotonicity_check,
    rate_finite_difference,
    verify_first_variation,
    verify_rate_formula,
    yamabe_initial_rate,
)
from .warped import (
    WarpedMetric,
    boundary_data,
    class_curvature,
    conformal_transform,
    embed_to_patch,
    integrate_boundary,
    integrate_radial,
    normalize_zero_mean_curvature,
    radial_laplacian,
    radial_weights,
    sphere_area,
    volume,
    warped_curvature,
)
from .yamabe import (
    SolutionBranch,
    SubcriticalProblem,
    YamabeSolution,
    conformal_energy_coefficient,
    critical_exponent,
    solve_subcritical,
    yamabe_metric,
    yamabe_quotient,
)

__version__ = "0.1.0"

__all__ = [
    "CASE_BUILDERS",
    "FirstVariationReport",
    "FlowParams",
    "FlowState",
    "IntegratedFamily",
    "MonotonicityReport",
    "RateFormulaReport",
    "ShrinkingCap",
    "ShrinkingCylinder",
    "SingularTimeError",
    "SolutionBranch",
    "SubcriticalProblem",
    "Trajectory",
    "WarpedMetric",
    "YamabeSolution",
    "advance_to",
    "boundary_data",
    "cfl_timestep",
    "class_curvature",
    "conformal_energy_coefficient",
    "conformal_transform",
    "critical_exponent",
    "embed_to_patch",
    "evolution_rate_terms",
    "evolve",
    "exact_solution",
    "integrate_boundary",
    "integrate_radial",
    "make_cylinder",
    "make_hemisphere",
    "make_perturbed_cylinder",
    "make_truncated_cap",
    "monotonicity_check",
    "normalize_zero_mean_curvature",
    "radial_laplacian",
    "radial_weights",
    "rate_finite_difference",
    "solve_subcritical",
    "sphere_area",
    "step_once",
    "verify_first_variation",
    "verify_flow_identities",
    "verify_rate_formula",
    "volume",
    "warped_curvature",
    "yamabe_initial_rate",
    "yamabe_metric",
    "yamabe_quotient",
]
