"""Boundary-value Ricci flow in the warped class.

With round fibers the flow closes on the two profiles:

    d/dt f = f_ss + (n-2)(f_s^2 - 1)/f
    d/dt h = (n-1) (f_ss / f) h

on the fixed grid r in [0, 1], arclength derivatives taken against the
current lapse (the grid never moves).  The minimal-boundary condition
f_s = 0 is the flow's boundary condition; profiles in that class extend
evenly through the boundary spheres, and the right-hand side exploits
this: f closes with parity ghosts (odd across a cap pole, even across a
boundary sphere) and the lapse needs no stencils at all because f_ss is
assembled in nested form.  After each step the boundary value of f is
projected so the measured one-sided slope is exactly zero, near-pole
lapse noise is filtered at truncation order, and the mean curvature is
re-measured and asserted, never assumed.

The h equation has no spatial derivatives of its own; at a cap pole its
rate uses the regular limit of f_ss/f by smooth extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .stencils import apply_fd, zero_slope_boundary_value
from .warped import (
    WarpedMetric,
    boundary_data,
    class_curvature,
    integrate_radial,
    radial_laplacian,
    volume,
    warped_curvature,
)

__all__ = [
    "FlowParams",
    "FlowState",
    "FlowRates",
    "Trajectory",
    "TrajectorySample",
    "SingularTimeError",
    "flow_rhs",
    "cfl_timestep",
    "step",
    "step_once",
    "advance_to",
    "evolve",
    "exact_solution",
    "IntegratedFamily",
    "verify_flow_identities",
    "FlowIdentityReport",
]

_H_TOL = 1e-6
# discrete pole drift under time stepping; fresh constructions keep 1e-8
_FLOW_POLE_TOL = 1e-5


class SingularTimeError(RuntimeError):
    """The metric degenerated (f or h lost positivity) during a step."""

    def __init__(self, message: str, t: float, node: int | None = None):
        super().__init__(message)
        self.t = t
        self.node = node
        self.partial = None  # evolve() attaches the trajectory so far


@dataclass(frozen=True)
class FlowParams:
    cfl: float = 0.2
    t_end: float = 0.0
    scheme: str = "rk4"
    monitor_every: int = 100

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme not in ("rk4", "implicit_euler"):
            raise ValueError(
                f"scheme must be 'rk4' or 'implicit_euler', got {self.scheme!r}"
            )
        if not isinstance(self.monitor_every, int) or self.monitor_every < 1:
            raise ValueError(f"monitor_every must be a positive integer")


@dataclass(frozen=True)
class FlowState:
    metric: WarpedMetric
    t: float
    dt_last: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "dt_last", float(self.dt_last))
        bd = boundary_data(self.metric)
        worst = max(abs(H) for H in bd.mean_curvature.values())
        if worst > _H_TOL:
            raise ValueError(
                f"flow state violates the minimal-boundary condition: "
                f"max |H| = {worst:.3e} at t = {self.t}"
            )


class FlowRates(NamedTuple):
    f_rate: np.ndarray
    h_rate: np.ndarray


class TrajectorySample(NamedTuple):
    t: float
    min_f: float
    max_f: float
    min_scalar: float
    max_scalar: float
    volume: float
    mean_curvature: dict


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    samples: tuple

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def boundary_radii(self) -> list:
        """(t, {side: boundary sphere radius}) for every stored state.

        The boundary conformal class is pinned by construction, so this
        history is the record a caller audits to confirm the boundary
        spheres kept their radii instead of silently rescaling.
        """
        out = []
        for state in self.states:
            bd = boundary_data(state.metric)
            out.append((state.t, dict(bd.sphere_radius)))
        return out

    def csv_rows(self) -> list:
        """Rows for the trajectory table; a cap has no left boundary."""
        rows = [("t", "min_f", "max_f", "min_R", "max_R", "volume",
                 "H_left", "H_right")]
        for s in self.samples:
            h_left = s.mean_curvature.get("left")
            rows.append((
                repr(s.t), repr(s.min_f), repr(s.max_f), repr(s.min_scalar),
                repr(s.max_scalar), repr(s.volume),
                "" if h_left is None else repr(h_left),
                repr(s.mean_curvature["right"]),
            ))
        return rows


def _rhs_arrays(n: int, domain: str, dr: float, f: np.ndarray, h: np.ndarray,
                t_blame: float):
    """Flow right-hand side on raw profile arrays.

    Kept free of WarpedMetric construction so integrator stages carrying a
    slightly drifted pole ratio are not rejected mid-step.

    The second arclength derivative is assembled in nested form,
    f_ss = d_r(f_r / h) / h, which involves no derivative of h.  The
    expanded form couples lapse noise into f_ss through an h_r stencil
    with a 1/dr^2 gain at the nodes next to a cap pole; since h obeys a
    pointwise rate with no diffusion of its own to damp that noise, the
    expanded closure has step-map eigenvalues outside the unit circle at
    every resolution, while the nested one is clean.  Parity of f_s is
    opposite to f across each end (even over a pole, odd over a
    zero-slope boundary sphere).
    """
    interior = f[1:-1] if domain == "tube" else f[2:-1]
    if interior.size and np.min(interior) <= 0.0:
        node = int(np.argmin(f[1:-1])) + 1
        raise SingularTimeError(
            f"sphere radius collapsed at node {node} (r = {node * dr:.4f})",
            t_blame, node,
        )
    if np.min(h) <= 0.0:
        node = int(np.argmin(h))
        raise SingularTimeError(
            f"radial lapse collapsed at node {node} (r = {node * dr:.4f})",
            t_blame, node,
        )
    is_cap = domain == "cap"
    f_r = apply_fd(f, dr, 1, left="odd" if is_cap else "even", right="even")
    f_s = f_r / h
    f_ss = apply_fd(f_s, dr, 1, left="even" if is_cap else "odd",
                    right="odd") / h
    f_safe = f.copy()
    if is_cap:
        f_safe[0] = 1.0  # pole rates overwritten below
    f_rate = f_ss + (n - 2) * (f_s**2 - 1.0) / f_safe
    q = f_ss / f_safe
    if is_cap:
        f_rate[0] = 0.0
        # regular limit of f_ss/f at the pole by even extrapolation
        q[0] = q[1]
        q[0] = zero_slope_boundary_value(q, "left")
    h_rate = (n - 1) * q * h
    return f_rate, h_rate


def flow_rhs(wm: WarpedMetric) -> FlowRates:
    """Time derivatives of the two profiles under the flow."""
    f_rate, h_rate = _rhs_arrays(wm.n, wm.domain, wm.dr, wm.f, wm.h, math.nan)
    return FlowRates(f_rate, h_rate)


def cfl_timestep(wm: WarpedMetric, cfl: float) -> float:
    """Parabolic step bound on the arclength grid, cfl * (min ds)^2."""
    return float(cfl * (np.min(wm.h) * wm.dr) ** 2)


@lru_cache(maxsize=None)
def _pole_filter(sample: int) -> np.ndarray:
    """Least-squares projector of the first nodes onto even quartics in r.

    The lapse carries no spatial derivatives in the flow, so sawtooth
    noise seeded next to a cap pole is never damped by the equations and
    feeds back through the 1/f factors; projecting the first few lapse
    values onto the smooth even local model removes it at truncation
    order (the model error on smooth data is O(dr^6), same as the
    stencils).  The projector returns fitted values for the first
    sample - 4 nodes from the first sample nodes.
    """
    j = np.arange(sample, dtype=float)
    basis = np.stack([np.ones_like(j), j**2, j**4], axis=1)
    proj = basis @ np.linalg.pinv(basis)
    out = proj[: sample - 4]
    out.flags.writeable = False
    return out


def _project_boundary(domain: str, dr: float, f: np.ndarray,
                      h: np.ndarray) -> None:
    """Re-impose the structural constraints nodally after a step.

    Boundary spheres get the zero-slope condition on f, imposed with the
    same tenth-order stencil that certifies the mean curvature so the
    projected state passes its own certificate on coarse grids.  At a
    cap pole, f is pinned to zero, near-pole lapse noise is filtered,
    and the pole lapse itself is rederived from the smoothness ratio
    f_r(0)/h(0) = 1; integrating h(0) by its own pole ODE accumulates
    the error that the constraint fixes exactly.
    """
    if domain == "tube":
        f[0] = zero_slope_boundary_value(f, "left", width=11)
        f[-1] = zero_slope_boundary_value(f, "right", width=11)
    else:
        f[0] = 0.0
        f[-1] = zero_slope_boundary_value(f, "right", width=11)
        sample = min(f.size, 10)
        h[: sample - 4] = _pole_filter(sample) @ h[:sample]
        h[0] = apply_fd(f, dr, 1, left="odd", right="even")[0]


def step_once(wm: WarpedMetric, dt: float, scheme: str = "rk4",
              t_blame: float = math.nan) -> WarpedMetric:
    """One integrator step of signed size dt (no CFL logic, no monitors)."""
    n, domain, dr = wm.n, wm.domain, wm.dr
    f0, h0 = wm.f, wm.h
    if dt == 0.0:
        return wm
    if scheme == "rk4":
        kf1, kh1 = _rhs_arrays(n, domain, dr, f0, h0, t_blame)
        kf2, kh2 = _rhs_arrays(n, domain, dr, f0 + 0.5 * dt * kf1,
                               h0 + 0.5 * dt * kh1, t_blame)
        kf3, kh3 = _rhs_arrays(n, domain, dr, f0 + 0.5 * dt * kf2,
                               h0 + 0.5 * dt * kh2, t_blame)
        kf4, kh4 = _rhs_arrays(n, domain, dr, f0 + dt * kf3, h0 + dt * kh3,
                               t_blame)
        f1 = f0 + (dt / 6.0) * (kf1 + 2.0 * kf2 + 2.0 * kf3 + kf4)
        h1 = h0 + (dt / 6.0) * (kh1 + 2.0 * kh2 + 2.0 * kh3 + kh4)
    elif scheme == "implicit_euler":
        f1, h1 = _implicit_euler(n, domain, dr, f0, h0, dt, t_blame)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    _project_boundary(domain, dr, f1, h1)
    if np.min(f1[1:] if domain == "cap" else f1) <= 0.0 or np.min(h1) <= 0.0:
        raise SingularTimeError("profile lost positivity after a step", t_blame)
    return WarpedMetric(n, domain, h1, f1, pole_tol=_FLOW_POLE_TOL)


def _implicit_euler(n, domain, dr, f0, h0, dt, t_blame):
    """Backward Euler via Newton with a finite-difference Jacobian.

    Dense linear algebra; intended for stiff late-stage runs at moderate N,
    not for production-size sweeps.
    """
    nodes = f0.size
    x = np.concatenate([f0, h0])

    def residual(x):
        f, h = x[:nodes], x[nodes:]
        rf, rh = _rhs_arrays(n, domain, dr, f, h, t_blame)
        return np.concatenate([f - f0 - dt * rf, h - h0 - dt * rh])

    for _ in range(12):
        res = residual(x)
        if np.abs(res).max() <= 1e-13 * max(1.0, np.abs(x).max()):
            break
        jac = np.empty((x.size, x.size))
        base = res
        for k in range(x.size):
            stepk = 1e-7 * max(1.0, abs(x[k]))
            xk = x.copy()
            xk[k] += stepk
            jac[:, k] = (residual(xk) - base) / stepk
        x = x - np.linalg.solve(jac, res)
    return x[:nodes].copy(), x[nodes:].copy()


def step(state: FlowState, params: FlowParams) -> FlowState:
    """One CFL-limited step; re-checks the boundary condition."""
    dt = cfl_timestep(state.metric, params.cfl)
    new_metric = step_once(state.metric, dt, params.scheme, state.t)
    return FlowState(new_metric, state.t + dt, dt)


def advance_to(state: FlowState, t_target: float, params: FlowParams) -> FlowState:
    """Advance to exactly t_target with uniformly sized CFL-bounded steps."""
    gap = t_target - state.t
    if gap < 0.0:
        raise ValueError(
            f"cannot integrate backward: requested t = {t_target} from t = {state.t}"
        )
    if gap == 0.0:
        return state
    current = state
    while current.t < t_target - 1e-15 * max(1.0, abs(t_target)):
        remaining = t_target - current.t
        dt_cap = cfl_timestep(current.metric, params.cfl)
        substeps = max(1, int(math.ceil(remaining / dt_cap - 1e-12)))
        dt = remaining / substeps
        metric = current.metric
        t = current.t
        for _ in range(substeps):
            metric = step_once(metric, dt, params.scheme, t)
            t += dt
        current = FlowState(metric, t_target, dt)
    return current


def _sample(state: FlowState) -> TrajectorySample:
    curv = warped_curvature(state.metric)
    bd = boundary_data(state.metric)
    return TrajectorySample(
        t=state.t,
        min_f=float(state.metric.f[1:].min() if state.metric.domain == "cap"
                    else state.metric.f.min()),
        max_f=float(state.metric.f.max()),
        min_scalar=float(curv.scalar.min()),
        max_scalar=float(curv.scalar.max()),
        volume=volume(state.metric),
        mean_curvature=dict(bd.mean_curvature),
    )


def evolve(state: FlowState, params: FlowParams) -> Trajectory:
    """Integrate to params.t_end, sampling every monitor_every-th step.

    On a singularity the partial trajectory is attached to the raised
    SingularTimeError as .partial.
    """
    states = [state]
    samples = [_sample(state)]
    count = 0
    current = state
    try:
        while current.t < params.t_end:
            dt = cfl_timestep(current.metric, params.cfl)
            if current.t + dt > params.t_end:
                current = advance_to(current, params.t_end, params)
            else:
                current = step(current, params)
            count += 1
            if count % params.monitor_every == 0 or current.t >= params.t_end:
                states.append(current)
                samples.append(_sample(current))
    except SingularTimeError as err:
        err.partial = Trajectory(tuple(states), tuple(samples))
        raise
    if states[-1] is not current:
        states.append(current)
        samples.append(_sample(current))
    return Trajectory(tuple(states), tuple(samples))


def exact_solution(kind: str, t: float, n: int = 3, radius: float = 1.0,
                   length: float = 1.0, N: int = 128) -> WarpedMetric:
    """Closed-form flow solutions used as integrator oracles."""
    from .cases import ShrinkingCap, ShrinkingCylinder

    if kind == "shrinking_cylinder":
        return ShrinkingCylinder(n, radius, length, N).metric_at(t)
    if kind == "shrinking_cap":
        return ShrinkingCap(n, radius, N).metric_at(t)
    raise ValueError(
        f"kind must be 'shrinking_cylinder' or 'shrinking_cap', got {kind!r}"
    )


class IntegratedFamily:
    """Numerically flowed metric family t -> metric, cached by time.

    Times must be >= the start time (the discrete flow is not reversible).
    Each request integrates forward from the latest cached time at or
    below it, so a fixed set of requested times yields identical metrics
    regardless of request order.
    """

    def __init__(self, initial: WarpedMetric, params: FlowParams | None = None,
                 t_start: float = 0.0):
        self.params = params if params is not None else FlowParams()
        self.t_min = t_start
        self._states: dict[float, FlowState] = {
            t_start: FlowState(initial, t_start)
        }

    def metric_at(self, t: float) -> WarpedMetric:
        return self.state_at(t).metric

    def state_at(self, t: float) -> FlowState:
        t = float(t)
        if t in self._states:
            return self._states[t]
        if t < self.t_min:
            raise ValueError(
                f"time {t} precedes the family start {self.t_min}; "
                f"the numerical flow only runs forward"
            )
        base_t = max(s for s in self._states if s <= t)
        state = advance_to(self._states[base_t], t, self.params)
        self._states[t] = state
        return state


class FlowIdentityReport(NamedTuple):
    t_pivot: float
    dt: float
    scalar_abs: float
    scalar_rel: float
    scalar_scale: float
    volume_abs: float
    volume_rel: float
    gradient_abs: float | None
    gradient_rel: float | None


def _central_diff(values, dt: float, richardson: bool):
    """Second-order central difference at the middle sample.

    values holds samples at pivot - dt, pivot, pivot + dt when richardson
    is off, and at pivot +- dt, pivot +- dt/2, pivot (five equally spaced
    samples) when on; extrapolation then cancels the dt^2 term nodally.
    """
    if not richardson:
        return (values[2] - values[0]) / (2.0 * dt)
    wide = (values[4] - values[0]) / (2.0 * dt)
    narrow = (values[3] - values[1]) / dt
    return (4.0 * narrow - wide) / 3.0


def verify_flow_identities(family, dt: float, t0: float = 0.0, branch=None,
                           scale_dt: bool = True,
                           richardson: bool = True) -> FlowIdentityReport:
    """Finite-difference check of the structural evolution identities.

    Pivots at t0 + dt and differences forward-only samples (the discrete
    flow cannot run backward): d/dt scalar = lap(scalar) + 2 |Ric|^2
    nodally, and d/dt Vol = -integral(scalar).  With a solution branch
    supplied, also d/dt |grad u|^2 = 2 Ric(grad u, grad u)
    + 2 <grad u, grad du/dt> for the branch's u(t).  Residuals are
    max-norm, reported in absolute form and relative to the identity's
    own scale.

    scale_dt divides dt by max |scalar| (when that exceeds one) so the
    step measures the same fraction of the curvature time scale on every
    geometry; richardson extrapolates the differences over (dt, dt/2).
    Both mirror the package-wide defaults for time derivatives.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if scale_dt:
        base = warped_curvature(family.metric_at(t0)).scalar
        dt = dt * min(1.0, 1.0 / float(np.abs(base).max()))
    if richardson:
        offsets = (0.0, 0.5, 1.0, 1.5, 2.0)
    else:
        offsets = (0.0, 1.0, 2.0)
    times = [t0 + dt * k for k in offsets]
    metrics = [family.metric_at(t) for t in times]
    pivot = metrics[len(metrics) // 2]
    curv = warped_curvature(pivot)
    n = pivot.n

    scalars = [class_curvature(m).scalar for m in metrics]
    lhs_scalar = _central_diff(scalars, dt, richardson)
    pivot_curv = class_curvature(pivot)
    rhs_scalar = pivot_curv.scalar_laplacian + 2.0 * pivot_curv.ricci_norm_sq
    scalar_abs = float(np.abs(lhs_scalar - rhs_scalar).max())
    scalar_scale = float(np.abs(rhs_scalar).max())
    scalar_rel = scalar_abs / max(scalar_scale, 1e-300)

    volumes = [volume(m) for m in metrics]
    lhs_volume = _central_diff(volumes, dt, richardson)
    rhs_volume = -integrate_radial(pivot, scalars[len(scalars) // 2])
    volume_abs = float(abs(lhs_volume - rhs_volume))
    volume_rel = volume_abs / max(abs(rhs_volume), 1e-300)

    gradient_abs = gradient_rel = None
    if branch is not None:
        us = [branch.at(t).solution.u for t in times]
        grads = [radial_laplacian(m, u).gradient_sq
                 for m, u in zip(metrics, us)]
        lhs_grad = _central_diff(grads, dt, richardson)
        u_dot = _central_diff(us, dt, richardson)
        u_dot_slope = radial_laplacian(pivot, u_dot).radial_slope
        u_s = radial_laplacian(pivot, us[len(us) // 2]).radial_slope
        rhs_grad = 2.0 * curv.lambda_radial * u_s**2 + 2.0 * u_s * u_dot_slope
        gradient_abs = float(np.abs(lhs_grad - rhs_grad).max())
        scale = max(float(np.abs(rhs_grad).max()),
                    float(np.abs(lhs_grad).max()), 1e-12)
        gradient_rel = gradient_abs / scale

    return FlowIdentityReport(
        t_pivot=float(times[len(times) // 2]), dt=dt,
        scalar_abs=scalar_abs, scalar_rel=scalar_rel, scalar_scale=scalar_scale,
        volume_abs=volume_abs, volume_rel=volume_rel,
        gradient_abs=gradient_abs, gradient_rel=gradient_rel,
    )
