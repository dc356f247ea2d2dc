"""Evolution rate of the sub-critical quotient along the flow.

The quotient's time derivative at a normalized minimizer splits into four
integrals: a trace-free Ricci line, a coefficient line that vanishes at
the critical exponent, a line of Laplacians of the scalar curvature and
of u^2, and a boundary line that the zero-mean-curvature condition kills.
This module evaluates that split from a metric and minimizer alone, and
independently measures the same derivative by finite differences of
re-solved minimizers along the discrete flow, so the two routes share no
code beyond the geometry they both consume.

All finite differences pivot a step into the interior of the family's
time range when the family cannot run backward, and step sizes follow
the package default of scaling by the curvature magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .flow import FlowParams, IntegratedFamily
from .stencils import edge_derivative
from .warped import (
    WarpedMetric,
    boundary_data,
    integrate_radial,
    radial_laplacian,
    sphere_area,
    volume,
    warped_curvature,
)
from .yamabe import (
    SolutionBranch,
    SubcriticalProblem,
    conformal_energy_coefficient,
    critical_exponent,
)

__all__ = [
    "RateFormulaReport",
    "FiniteDifferenceRate",
    "FirstVariationReport",
    "MonotonicityReport",
    "evolution_rate_terms",
    "rate_finite_difference",
    "verify_rate_formula",
    "verify_first_variation",
    "yamabe_initial_rate",
    "monotonicity_check",
]

_TERM_KEYS = ("ric0_terms", "coefficient_line", "laplacian_line",
              "boundary_line")
_REL_FLOOR = 1e-6
_NEUMANN_PRECHECK = 1e-8
_SPLIT_TOL = 1e-12


@dataclass(frozen=True)
class RateFormulaReport:
    p: float
    t_pivot: float
    rate_fd: float
    rhs_total: float
    rhs_terms: dict
    rel_error: float
    trusted: bool
    dt: float

    def __post_init__(self) -> None:
        if set(self.rhs_terms) != set(_TERM_KEYS):
            raise ValueError(
                f"rhs_terms keys must be {set(_TERM_KEYS)}, got "
                f"{set(self.rhs_terms)}"
            )
        split = sum(self.rhs_terms.values())
        if abs(split - self.rhs_total) > _SPLIT_TOL * max(1.0, abs(self.rhs_total)):
            raise ValueError(
                f"term split {split!r} does not reproduce rhs_total "
                f"{self.rhs_total!r}"
            )


def _scaled_dt(wm: WarpedMetric, dt: float) -> float:
    scale = float(np.abs(warped_curvature(wm).scalar).max())
    return dt * min(1.0, 1.0 / scale)


def _check_neumann(wm: WarpedMetric, u: np.ndarray) -> None:
    # wide one-sided measurement, see the solver's boundary slope check
    scale = float(np.abs(u).max())
    for side in wm.sides:
        j = 0 if side == "left" else -1
        slope = edge_derivative(u, wm.dr, side, width=11) / wm.h[j]
        if abs(slope) > _NEUMANN_PRECHECK * max(1.0, scale):
            raise ValueError(
                f"u is not in the Neumann class: measured boundary slope "
                f"{slope:.3e} on the {side} side"
            )


def evolution_rate_terms(wm: WarpedMetric, u: np.ndarray, p: float) -> dict:
    """Four-term split of d/dt Y_p at a normalized Neumann minimizer.

    The boundary line is assembled from the formula's own factors, the
    mixed Ricci flux against the tangential gradient of u, both of which
    vanish structurally in this symmetry class.  Membership in the
    Neumann class is not assumed: a u whose measured boundary slope
    exceeds 1e-8 relative is rejected, since the split is only
    meaningful on the constrained family.
    """
    problem = SubcriticalProblem(wm, p)  # validates p and the boundary class
    u = np.asarray(u, dtype=float)
    if u.shape != wm.f.shape:
        raise ValueError(f"u has shape {u.shape}, expected {wm.f.shape}")
    if np.min(u) <= 0.0:
        raise ValueError("u must be positive")
    n = wm.n
    a = conformal_energy_coefficient(n)
    curv = warped_curvature(wm)
    lap_u = radial_laplacian(wm, u, curv)
    _check_neumann(wm, u)
    scalar = curv.scalar
    u_s = lap_u.radial_slope
    grad_sq = lap_u.gradient_sq

    ric0_radial = curv.lambda_radial - scalar / n
    ric0 = integrate_radial(
        wm, 2.0 * a * ric0_radial * u_s**2 + 2.0 * curv.tracefree_norm_sq * u**2
    )

    if problem.is_critical:
        coefficient = 0.0
    else:
        coefficient = 2.0 / n - (p - 1.0) / (p + 1.0)
    coefficient_line = coefficient * integrate_radial(
        wm, a * scalar * grad_sq + scalar**2 * u**2
    )

    lap_scalar = radial_laplacian(wm, scalar, curv).laplacian
    lap_u_sq = radial_laplacian(wm, u * u, curv).laplacian
    laplacian_line = integrate_radial(
        wm, u**2 * lap_scalar - (a / (p + 1.0)) * scalar * lap_u_sq
    )

    area = sphere_area(n - 1)
    boundary_line = 0.0
    for side in wm.sides:
        j = 0 if side == "left" else -1
        # the boundary integrand pairs the mixed Ricci components with the
        # tangential gradient of u: the normal-normal piece was removed by
        # the Neumann constraint when the rate formula was assembled, and
        # the normal derivative of du/dt is itself a mixed-Ricci flux.  In
        # this symmetry class both factors vanish structurally: the Ricci
        # tensor of a warped metric is diagonal in the radial/spherical
        # frame, and a rotationally invariant u has no tangential gradient.
        ric_mixed = 0.0
        tangential_grad_u = 0.0
        ricci_flux = ric_mixed * tangential_grad_u
        rate_normal_slope = -2.0 * ricci_flux
        boundary_line += (
            -2.0 * a * area * wm.f[j] ** (n - 1)
            * u[j] * (2.0 * ricci_flux + rate_normal_slope)
        )

    return {
        "ric0_terms": float(ric0),
        "coefficient_line": float(coefficient_line),
        "laplacian_line": float(laplacian_line),
        "boundary_line": float(boundary_line),
    }


class FiniteDifferenceRate(NamedTuple):
    value: float
    trusted: bool
    t_pivot: float
    dt: float


def _pivot_time(family, t0: float, span: float) -> float:
    """Center the difference stencil inside the family's time range."""
    t_min = getattr(family, "t_min", -math.inf)
    if t0 - span >= t_min - 1e-15 * max(1.0, abs(t_min)):
        return t0
    return t0 + span


def rate_finite_difference(family, p: float, t0: float = 0.0,
                           dt: float = 1e-4, richardson: bool = True,
                           branch: SolutionBranch | None = None,
                           scale_dt: bool = True) -> FiniteDifferenceRate:
    """d/dt Y_p measured from re-solved minimizers along the family.

    Central differences around a pivot, seeded by branch continuation;
    Richardson extrapolation over (dt, dt/2) is on by default.  The value
    is untrusted if the branch jumped between any pair of samples used.
    """
    if branch is None:
        branch = SolutionBranch(family, p)
    if scale_dt:
        dt = _scaled_dt(family.metric_at(t0), dt)
    pivot = _pivot_time(family, t0, dt)
    offsets = (-1.0, -0.5, 0.5, 1.0) if richardson else (-1.0, 1.0)
    points = [branch.at(pivot + dt * k) for k in offsets]
    values = [pt.solution.Y for pt in points]
    trusted = not any(pt.jumped for pt in points)
    if richardson:
        wide = (values[3] - values[0]) / (2.0 * dt)
        narrow = (values[2] - values[1]) / dt
        rate = (4.0 * narrow - wide) / 3.0
    else:
        rate = (values[1] - values[0]) / (2.0 * dt)
    return FiniteDifferenceRate(float(rate), trusted, pivot, dt)


def verify_rate_formula(family, p: float, dt: float = 1e-4, t0: float = 0.0,
                        richardson: bool = True,
                        scale_dt: bool = True) -> RateFormulaReport:
    """Compare the four-term split against the finite-difference rate.

    Both routes are evaluated at the same pivot time; the relative error
    is |fd - split| / max(|split|, 1e-6).
    """
    branch = SolutionBranch(family, p)
    fd = rate_finite_difference(family, p, t0=t0, dt=dt,
                                richardson=richardson, branch=branch,
                                scale_dt=scale_dt)
    metric = family.metric_at(fd.t_pivot)
    point = branch.at(fd.t_pivot)
    terms = evolution_rate_terms(metric, point.solution.u, p)
    total = sum(terms.values())
    rel_error = abs(fd.value - total) / max(abs(total), _REL_FLOOR)
    return RateFormulaReport(
        p=p, t_pivot=fd.t_pivot, rate_fd=fd.value, rhs_total=total,
        rhs_terms=terms, rel_error=float(rel_error),
        trusted=fd.trusted and not point.jumped, dt=fd.dt,
    )


class FirstVariationReport(NamedTuple):
    t_pivot: float
    dt: float
    rate_fd: float
    rate_formula: float
    residual_abs: float
    residual_rel: float
    constraint_abs: float
    constraint_rel: float


def verify_first_variation(family, p: float, dt: float = 1e-4,
                           t0: float = 0.0,
                           scale_dt: bool = True) -> FirstVariationReport:
    """Check the pre-elimination derivative of the constrained energy.

    The energy derivative along the flow, before the minimizer equation
    removes the du/dt terms, reads

        dY/dt = int 2a Ric(grad u, grad u) + 2a <grad u, grad du/dt>
              + int (lap R + 2 |Ric|^2) u^2 + 2 R u du/dt
              - int (a |grad u|^2 + R u^2) R,

    with du/dt taken from branch finite differences.  The normalization
    constraint differentiates to int u^p du/dt = (1/(p+1)) int u^{p+1} R,
    checked alongside.  Both residuals are plain central differences (no
    extrapolation) so their convergence order in dt is observable.
    """
    branch = SolutionBranch(family, p)
    if scale_dt:
        dt = _scaled_dt(family.metric_at(t0), dt)
    pivot = _pivot_time(family, t0, dt)
    minus = branch.at(pivot - dt)
    center = branch.at(pivot)
    plus = branch.at(pivot + dt)

    rate_fd = (plus.solution.Y - minus.solution.Y) / (2.0 * dt)
    u_dot = (plus.solution.u - minus.solution.u) / (2.0 * dt)

    wm = family.metric_at(pivot)
    n = wm.n
    a = conformal_energy_coefficient(n)
    u = center.solution.u
    curv = warped_curvature(wm)
    scalar = curv.scalar
    lap_u = radial_laplacian(wm, u, curv)
    u_s = lap_u.radial_slope
    u_dot_s = radial_laplacian(wm, u_dot, curv).radial_slope
    lap_scalar = radial_laplacian(wm, scalar, curv).laplacian
    ricci_norm_sq = curv.lambda_radial**2 + (n - 1) * curv.lambda_sphere**2

    rate_formula = integrate_radial(
        wm,
        2.0 * a * curv.lambda_radial * u_s**2
        + 2.0 * a * u_s * u_dot_s
        + (lap_scalar + 2.0 * ricci_norm_sq) * u**2
        + 2.0 * scalar * u * u_dot
        - (a * lap_u.gradient_sq + scalar * u**2) * scalar,
    )

    residual_abs = abs(rate_fd - rate_formula)
    residual_rel = residual_abs / max(abs(rate_formula), _REL_FLOOR)

    constraint_lhs = integrate_radial(wm, u**p * u_dot)
    constraint_rhs = integrate_radial(wm, u ** (p + 1.0) * scalar) / (p + 1.0)
    constraint_abs = abs(constraint_lhs - constraint_rhs)
    constraint_rel = constraint_abs / max(abs(constraint_rhs), _REL_FLOOR)

    return FirstVariationReport(
        t_pivot=pivot, dt=dt, rate_fd=float(rate_fd),
        rate_formula=float(rate_formula),
        residual_abs=float(residual_abs), residual_rel=float(residual_rel),
        constraint_abs=float(constraint_abs),
        constraint_rel=float(constraint_rel),
    )


def yamabe_initial_rate(wm: WarpedMetric, volume_tol: float = 1e-6,
                        scalar_tol: float = 1e-5,
                        mean_curvature_tol: float = 1e-6) -> float:
    """Instantaneous d/dt Y_p at a unit-volume constant-curvature metric.

    At such a metric the minimizer is u = 1 for every exponent and the
    four-term split collapses to twice the squared trace-free Ricci norm
    integrated over the manifold, independent of p.  Preconditions are
    measured, and violations name the failing property.
    """
    vol = volume(wm)
    if abs(vol - 1.0) > volume_tol:
        raise ValueError(
            f"metric is not unit-volume: measured volume {vol!r}"
        )
    curv = warped_curvature(wm)
    mean = float(np.mean(curv.scalar))
    spread = float(np.abs(curv.scalar - mean).max())
    if spread > scalar_tol * max(1.0, abs(mean)):
        raise ValueError(
            f"scalar curvature is not constant: relative spread "
            f"{spread / max(1.0, abs(mean)):.3e}"
        )
    bd = boundary_data(wm)
    worst = max(abs(H) for H in bd.mean_curvature.values())
    if worst > mean_curvature_tol:
        raise ValueError(
            f"boundary is not minimal: measured max |H| = {worst:.3e}"
        )
    return 2.0 * integrate_radial(wm, curv.tracefree_norm_sq)


class MonotonicityReport(NamedTuple):
    times: tuple
    values: tuple
    min_rate: float
    non_decreasing: bool
    einstein: bool
    equality_consistent: bool


def monotonicity_check(wm: WarpedMetric, t_end: float, samples: int = 5,
                       rate_tol: float = 5e-3, einstein_tol: float = 1e-8,
                       params: FlowParams | None = None,
                       solver_N_cap: int | None = None) -> MonotonicityReport:
    """Sample the critical quotient along the flow and test monotonicity.

    The quotient must be non-decreasing up to rate_tol per unit time, and
    constant exactly when the initial metric is Einstein (trace-free
    Ricci below einstein_tol): that is reported as equality_consistent,
    which is False when an Einstein start drifts or a non-Einstein start
    shows no strictly positive rate anywhere.
    """
    if samples < 2:
        raise ValueError(f"samples must be at least 2, got {samples}")
    family = IntegratedFamily(wm, params)
    p_crit = critical_exponent(wm.n)
    branch = SolutionBranch(family, p_crit)
    times = np.linspace(0.0, t_end, samples)
    values = [branch.at(float(t)).solution.Y for t in times]
    rates = np.diff(values) / np.diff(times)
    min_rate = float(rates.min())
    scale = max(abs(v) for v in values)
    non_decreasing = min_rate >= -rate_tol * max(1.0, scale)
    einstein = float(warped_curvature(wm).tracefree_norm_sq.max()) <= einstein_tol
    if einstein:
        drift = max(abs(v - values[0]) for v in values)
        equality_consistent = drift <= rate_tol * max(1.0, scale)
    else:
        equality_consistent = float(rates.max()) > 0.0
    return MonotonicityReport(
        times=tuple(float(t) for t in times),
        values=tuple(float(v) for v in values),
        min_rate=min_rate,
        non_decreasing=bool(non_decreasing),
        einstein=bool(einstein),
        equality_consistent=bool(equality_consistent),
    )
