"""Rotationally symmetric metrics on [0, 1] and their intrinsic geometry.

A metric g = h(r)^2 dr^2 + f(r)^2 g_{S^{n-1}} lives either on the tube
[0, 1] x S^{n-1} (two boundary spheres) or on a cap (closed n-ball, the
r = 0 sphere collapses to a smooth pole).  Profiles h, f are stored on a
uniform nodal grid over [0, 1].  With the arclength derivative
d/ds = h^{-1} d/dr, the curvature reduces to radial expressions:

    lambda_radial = -(n-1) f_ss / f                      (radial Ricci eigenvalue)
    lambda_sphere = -f_ss/f + (n-2)(1 - f_s^2)/f^2       (fiber Ricci eigenvalue)
    scalar        = lambda_radial + (n-1) lambda_sphere
    H             = +-(n-1) f_s / f                      (outward mean curvature)

Radial derivatives use sixth-order finite differences.  At a cap pole the
stencils close through r = 0 by parity (f odd, h and scalar fields even);
at genuine boundary nodes they are one-sided, so boundary quantities are
measured rather than assumed.  Pole values of the curvature use the smooth
limits

    lambda_radial(0) = lambda_sphere(0) = -(n-1) f_sss(0) / f_s(0),
    f_sss(0) = (f_rrr(0) - f_r(0) h_rr(0) / h(0)) / h(0)^3,

and the Laplacian limit n u_rr(0) / h(0)^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .patch_geometry import CoordinatePatch, MetricField
from .stencils import apply_fd, edge_derivative, zero_slope_boundary_value

__all__ = [
    "WarpedMetric",
    "WarpedCurvature",
    "BoundaryData",
    "LaplacianData",
    "NormalizedMetric",
    "CompatibilityData",
    "ClassCurvature",
    "sphere_area",
    "warped_curvature",
    "class_curvature",
    "boundary_data",
    "radial_laplacian",
    "radial_weights",
    "integrate_radial",
    "integrate_boundary",
    "volume",
    "conformal_transform",
    "normalize_zero_mean_curvature",
    "compatibility_residual",
    "embed_to_patch",
]

# Sixth-order interior stencils are seven points wide; require one spare node.
_MIN_NODES = 8


def sphere_area(k: int) -> float:
    """Volume of the unit k-sphere: 2 pi^((k+1)/2) / Gamma((k+1)/2)."""
    if k < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {k}")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True, eq=False, repr=False)
class WarpedMetric:
    """Nodal profiles of a rotationally symmetric metric on [0, 1].

    domain "tube": boundary spheres at r = 0 and r = 1, f > 0 throughout.
    domain "cap": smooth pole at r = 0 (f(0) = 0, f_r(0)/h(0) = 1 within
    pole_tol), boundary sphere at r = 1.

    pole_tol exists because time stepping lets the discrete pole ratio
    drift a little; constructors of fresh geometries keep the default.
    """

    n: int
    domain: str
    h: np.ndarray
    f: np.ndarray
    pole_tol: float = 1e-8

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise TypeError(f"dimension n must be an integer, got {self.n!r}")
        if self.n < 3:
            raise ValueError(f"dimension n must be >= 3, got {self.n}")
        if self.domain not in ("tube", "cap"):
            raise ValueError(f"domain must be 'tube' or 'cap', got {self.domain!r}")
        if not self.pole_tol > 0.0:
            raise ValueError(f"pole_tol must be positive, got {self.pole_tol}")
        h = np.array(self.h, dtype=float)
        f = np.array(self.f, dtype=float)
        for name, arr in (("h", h), ("f", f)):
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one dimensional, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if h.shape != f.shape:
            raise ValueError(f"h and f must match, got {h.shape} and {f.shape}")
        if h.size < _MIN_NODES:
            raise ValueError(f"need at least {_MIN_NODES} nodes, got {h.size}")
        if not np.all(h > 0.0):
            raise ValueError("h must be positive everywhere")
        if self.domain == "tube":
            if not np.all(f > 0.0):
                raise ValueError("f must be positive everywhere on a tube")
        else:
            if f[0] != 0.0:
                raise ValueError(f"cap requires f(0) == 0 exactly, got {f[0]!r}")
            if not np.all(f[1:] > 0.0):
                raise ValueError("f must be positive away from the cap pole")
            dr = 1.0 / (f.size - 1)
            f_r0 = apply_fd(f, dr, 1, left="odd")[0]
            ratio = f_r0 / h[0]
            if abs(ratio - 1.0) > self.pole_tol:
                raise ValueError(
                    f"cap pole is not smooth: f_r(0)/h(0) = {ratio!r} "
                    f"differs from 1 by more than pole_tol = {self.pole_tol}"
                )
        h.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "f", f)

    @property
    def N(self) -> int:
        """Number of grid intervals."""
        return self.f.size - 1

    @property
    def dr(self) -> float:
        return 1.0 / self.N

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def sides(self) -> tuple[str, ...]:
        """Names of the boundary spheres."""
        return ("right",) if self.domain == "cap" else ("left", "right")

    def __repr__(self) -> str:
        return f"WarpedMetric(n={self.n}, domain={self.domain!r}, N={self.N})"

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "domain": self.domain,
            "N": int(self.N),
            "h": [float(v) for v in self.h],
            "f": [float(v) for v in self.f],
        }

    @classmethod
    def from_dict(cls, data: dict, pole_tol: float = 1e-8) -> "WarpedMetric":
        expected = {"n", "domain", "N", "h", "f"}
        if set(data) != expected:
            raise ValueError(
                f"metric record must have keys {sorted(expected)}, got {sorted(data)}"
            )
        h = np.asarray(data["h"], dtype=float)
        if h.ndim != 1 or h.size != int(data["N"]) + 1:
            raise ValueError("N must equal len(h) - 1")
        if len(data["f"]) != len(data["h"]):
            raise ValueError("h and f must have equal length")
        return cls(int(data["n"]), data["domain"], h, data["f"], pole_tol=pole_tol)


class WarpedCurvature(NamedTuple):
    """Pointwise curvature of a warped metric, indexed like the grid."""

    lambda_radial: np.ndarray
    lambda_sphere: np.ndarray
    scalar: np.ndarray
    tracefree_norm_sq: np.ndarray
    f_s: np.ndarray
    f_ss: np.ndarray


class ClassCurvature(NamedTuple):
    """Curvature measured with the zero-mean-curvature boundary closure."""

    scalar: np.ndarray
    ricci_norm_sq: np.ndarray
    scalar_laplacian: np.ndarray
    f_s: np.ndarray


class BoundaryData(NamedTuple):
    sides: tuple[str, ...]
    mean_curvature: dict
    sphere_radius: dict
    boundary_area: dict


class LaplacianData(NamedTuple):
    laplacian: np.ndarray
    radial_slope: np.ndarray
    gradient_sq: np.ndarray


class NormalizedMetric(NamedTuple):
    metric: "WarpedMetric"
    conformal_factor: np.ndarray


class CompatibilityData(NamedTuple):
    residual: float
    trace_ratio: np.ndarray


def _arclength_derivatives(wm: WarpedMetric):
    """Nodal f_s, f_ss and the raw r-derivatives used to build them."""
    dr = wm.dr
    f_mode = "odd" if wm.domain == "cap" else "onesided"
    e_mode = "even" if wm.domain == "cap" else "onesided"
    f_r = apply_fd(wm.f, dr, 1, left=f_mode)
    f_rr = apply_fd(wm.f, dr, 2, left=f_mode)
    h_r = apply_fd(wm.h, dr, 1, left=e_mode)
    f_s = f_r / wm.h
    f_ss = f_rr / wm.h**2 - f_r * h_r / wm.h**3
    return f_s, f_ss, f_r, h_r


def _pole_curvature_limit(wm: WarpedMetric, f_r0: float) -> float:
    """Common value of both Ricci eigenvalues at a cap pole."""
    dr = wm.dr
    h0 = wm.h[0]
    f_rrr0 = apply_fd(wm.f, dr, 3, left="odd")[0]
    h_rr0 = apply_fd(wm.h, dr, 2, left="even")[0]
    f_sss0 = (f_rrr0 - f_r0 * h_rr0 / h0) / h0**3
    f_s0 = f_r0 / h0
    return -(wm.n - 1) * f_sss0 / f_s0


def warped_curvature(wm: WarpedMetric) -> WarpedCurvature:
    """Ricci eigenvalues, scalar curvature and tracefree Ricci norm.

    All radial derivatives are sixth order.  Cap pole values come from the
    smooth limits stated in the module docstring; every quantity returned
    is finite on the full grid.
    """
    n = wm.n
    f_s, f_ss, f_r, _ = _arclength_derivatives(wm)
    f_safe = wm.f.copy()
    if wm.domain == "cap":
        f_safe[0] = 1.0  # placeholder, both eigenvalues overwritten below
    lam_rad = -(n - 1) * f_ss / f_safe
    lam_sph = -f_ss / f_safe + (n - 2) * (1.0 - f_s**2) / f_safe**2
    if wm.domain == "cap":
        lam0 = _pole_curvature_limit(wm, f_r[0])
        lam_rad[0] = lam0
        lam_sph[0] = lam0
    scalar = lam_rad + (n - 1) * lam_sph
    dev_rad = lam_rad - scalar / n
    dev_sph = lam_sph - scalar / n
    tracefree = dev_rad**2 + (n - 1) * dev_sph**2
    return WarpedCurvature(lam_rad, lam_sph, scalar, tracefree, f_s, f_ss)


def class_curvature(wm: WarpedMetric) -> ClassCurvature:
    """Curvature fields measured with the minimal-boundary parity closure.

    A metric with vanishing mean curvature has f_s = 0 at every genuine
    boundary sphere, so the profile extends evenly through it and the
    derivative stencils can close with ghost parities (f odd through a
    pole) instead of one-sided weights.  One-sided edge weights amplify
    profile roundoff by an extra order of magnitude and break the exact
    reflection symmetry of discrete fields built on top of them; the
    closure avoids both.  Only meaningful on metrics in the H = 0 class:
    warped_curvature is the measurement for arbitrary profiles.
    """
    n, dr, f, h = wm.n, wm.dr, wm.f, wm.h
    is_cap = wm.domain == "cap"
    f_r = apply_fd(f, dr, 1, left="odd" if is_cap else "even", right="even")
    f_s = f_r / h
    f_ss = apply_fd(f_s, dr, 1, left="even" if is_cap else "odd",
                    right="odd") / h
    f_safe = f.copy()
    if is_cap:
        f_safe[0] = 1.0
    q = f_ss / f_safe
    if is_cap:
        q[0] = q[1]
        q[0] = zero_slope_boundary_value(q, "left")
    lam_rad = -(n - 1) * q
    lam_sph = -q + (n - 2) * (1.0 - f_s**2) / f_safe**2
    if is_cap:
        lam_sph[0] = lam_rad[0]  # both limits coincide at a smooth pole
    scalar = lam_rad + (n - 1) * lam_sph
    ricci_norm_sq = lam_rad**2 + (n - 1) * lam_sph**2

    scalar_r = apply_fd(scalar, dr, 1, left="even", right="even")
    scalar_s = scalar_r / h
    scalar_ss = apply_fd(scalar_s, dr, 1, left="odd", right="odd") / h
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = scalar_ss + (n - 1) * (f_s / f_safe) * scalar_s
    if is_cap:
        scalar_rr0 = apply_fd(scalar, dr, 2, left="even", right="even")[0]
        lap[0] = n * scalar_rr0 / h[0] ** 2
    return ClassCurvature(scalar, ricci_norm_sq, lap, f_s)


def boundary_data(wm: WarpedMetric) -> BoundaryData:
    """Mean curvature and size of each boundary sphere.

    The normal slope is measured with a one-sided stencil at the boundary
    node itself, so a reported zero certifies the discrete profile, not a
    boundary condition imposed elsewhere.  The stencil is tenth order: a
    minimal boundary makes every odd profile derivative vanish there, and
    a narrower stencil on a coarse grid would report its own truncation
    at the size of the mean-curvature tolerance.
    """
    n = wm.n
    area = sphere_area(n - 1)
    mean_curvature: dict = {}
    sphere_radius: dict = {}
    boundary_area: dict = {}
    for side in wm.sides:
        j = 0 if side == "left" else -1
        sign = -1.0 if side == "left" else 1.0
        f_r_edge = edge_derivative(wm.f, wm.dr, side, width=11)
        f_s_edge = f_r_edge / wm.h[j]
        mean_curvature[side] = float(sign * (n - 1) * f_s_edge / wm.f[j])
        sphere_radius[side] = float(wm.f[j])
        boundary_area[side] = area * float(wm.f[j]) ** (n - 1)
    return BoundaryData(wm.sides, mean_curvature, sphere_radius, boundary_area)


def radial_laplacian(
    wm: WarpedMetric, u: np.ndarray, curvature: WarpedCurvature | None = None
) -> LaplacianData:
    """Laplace-Beltrami operator on a rotationally invariant function.

    Returns the Laplacian, the arclength slope u_s, and |grad u|^2 = u_s^2.
    At a cap pole u is even, u_s(0) = 0, and the Laplacian limit is
    n u_rr(0) / h(0)^2.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != wm.f.shape:
        raise ValueError(f"u has shape {u.shape}, expected {wm.f.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("u contains non-finite values")
    if curvature is None:
        curvature = warped_curvature(wm)
    dr = wm.dr
    e_mode = "even" if wm.domain == "cap" else "onesided"
    u_r = apply_fd(u, dr, 1, left=e_mode)
    u_rr = apply_fd(u, dr, 2, left=e_mode)
    h_r = apply_fd(wm.h, dr, 1, left=e_mode)
    u_s = u_r / wm.h
    u_ss = u_rr / wm.h**2 - u_r * h_r / wm.h**3
    f_safe = wm.f.copy()
    if wm.domain == "cap":
        f_safe[0] = 1.0  # placeholder, pole value overwritten below
    lap = u_ss + (wm.n - 1) * (curvature.f_s / f_safe) * u_s
    if wm.domain == "cap":
        lap[0] = wm.n * u_rr[0] / wm.h[0] ** 2
    return LaplacianData(lap, u_s, u_s**2)


def radial_weights(wm: WarpedMetric) -> np.ndarray:
    """Trapezoid quadrature weights for the volume measure f^{n-1} h dr dS."""
    w = sphere_area(wm.n - 1) * wm.f ** (wm.n - 1) * wm.h * wm.dr
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate_radial(wm: WarpedMetric, values: np.ndarray) -> float:
    """Integral over M of a rotationally invariant integrand."""
    values = np.asarray(values, dtype=float)
    if values.shape != wm.f.shape:
        raise ValueError(f"integrand has shape {values.shape}, expected {wm.f.shape}")
    return float(np.dot(radial_weights(wm), values))


def volume(wm: WarpedMetric) -> float:
    return float(radial_weights(wm).sum())


def integrate_boundary(wm: WarpedMetric, values: np.ndarray) -> float:
    """Integral over the boundary spheres of a rotationally invariant field.

    Each boundary component contributes its sphere area times the nodal
    value there; a cap has a single component at r = 1.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != wm.f.shape:
        raise ValueError(f"integrand has shape {values.shape}, expected {wm.f.shape}")
    area = sphere_area(wm.n - 1)
    total = 0.0
    for side in wm.sides:
        j = 0 if side == "left" else -1
        total += area * wm.f[j] ** (wm.n - 1) * values[j]
    return float(total)


def conformal_transform(
    wm: WarpedMetric, w: np.ndarray, check_boundary_slope: bool = True
) -> WarpedMetric:
    """Metric w^{4/(n-2)} g for a positive rotationally invariant factor w.

    Both profiles scale by w^{2/(n-2)}.  A factor with nonzero normal slope
    at a boundary sphere changes the mean curvature there, and a factor
    with nonzero slope at a cap pole is not smooth; both draw a warning
    unless check_boundary_slope is off.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != wm.f.shape:
        raise ValueError(f"conformal factor has shape {w.shape}, expected {wm.f.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("conformal factor contains non-finite values")
    if not np.all(w > 0.0):
        raise ValueError("conformal factor must be positive")
    if check_boundary_slope:
        slope_sides = wm.sides if wm.domain == "cap" else ("left", "right")
        checks = [(s, "boundary sphere") for s in slope_sides]
        if wm.domain == "cap":
            checks.append(("left", "cap pole"))
        for side, kind in checks:
            j = 0 if side == "left" else -1
            slope = edge_derivative(w, wm.dr, side, width=11)
            if abs(slope) > 1e-8 * max(1.0, abs(w[j])):
                what = (
                    "zero mean curvature is not preserved"
                    if kind == "boundary sphere"
                    else "the transformed cap is not smooth at the pole"
                )
                warnings.warn(
                    f"conformal factor has normal slope {slope:.3e} at the "
                    f"{side} {kind}; {what}",
                    stacklevel=2,
                )
    scale = w ** (2.0 / (wm.n - 2))
    f_new = wm.f * scale
    if wm.domain == "cap":
        f_new[0] = 0.0  # exact zero survives scaling
    return WarpedMetric(wm.n, wm.domain, wm.h * scale, f_new, pole_tol=wm.pole_tol)


def _measured_mean_curvatures(wm: WarpedMetric) -> np.ndarray:
    bd = boundary_data(wm)
    return np.array([bd.mean_curvature[s] for s in bd.sides])


def normalize_zero_mean_curvature(
    wm: WarpedMetric, tol: float = 1e-12, max_iter: int = 40
) -> NormalizedMetric:
    """Conformal change making every boundary sphere minimal.

    Uses log-quadratic bumps supported near each boundary, one coefficient
    per side.  The linearized solution in the continuum is

        coefficient = -(n-2) H h_edge / (2 (n-1)),

    and a finite-difference Newton iteration then drives the measured mean
    curvature of the discrete metric below tol.  Returns the new metric
    together with the conformal factor w (w = 1 if nothing had to move).
    """
    sides = wm.sides
    H0 = _measured_mean_curvatures(wm)
    nodes = wm.N + 1
    if np.all(np.abs(H0) <= tol):
        return NormalizedMetric(wm, np.ones(nodes))
    r = wm.r
    bumps = []
    coef = []
    for side, H_side in zip(sides, H0):
        if side == "right":
            bumps.append(0.5 * r**2)
            h_edge = wm.h[-1]
        else:
            bumps.append(0.5 * (1.0 - r) ** 2)
            h_edge = wm.h[0]
        coef.append(-(wm.n - 2) * H_side * h_edge / (2.0 * (wm.n - 1)))
    bumps = np.array(bumps)
    coef = np.array(coef)

    def transformed(c: np.ndarray) -> WarpedMetric:
        w = np.exp(c @ bumps)
        return conformal_transform(wm, w, check_boundary_slope=False)

    residual = _measured_mean_curvatures(transformed(coef))
    for _ in range(max_iter):
        if np.max(np.abs(residual)) <= tol:
            break
        jac = np.empty((len(sides), len(sides)))
        for k in range(len(sides)):
            step = 1e-6 * max(1.0, abs(coef[k]))
            bumped = coef.copy()
            bumped[k] += step
            jac[:, k] = (_measured_mean_curvatures(transformed(bumped)) - residual) / step
        coef = coef - np.linalg.solve(jac, residual)
        residual = _measured_mean_curvatures(transformed(coef))
    if np.max(np.abs(residual)) > 100.0 * tol:
        raise RuntimeError(
            f"mean curvature normalization stalled at {np.max(np.abs(residual)):.3e}"
        )
    w = np.exp(coef @ bumps)
    return NormalizedMetric(transformed(coef), w)


def compatibility_residual(wm: WarpedMetric) -> CompatibilityData:
    """Deviation of the fiber Ricci block from a multiple of the fiber metric.

    In an orthonormal fiber frame the Ricci block is lambda_sphere times the
    identity, so the trace ratio recovers lambda_sphere and the residual
    vanishes identically; the check guards the block construction.
    """
    curv = warped_curvature(wm)
    k = wm.n - 1
    eye = np.eye(k)
    blocks = curv.lambda_sphere[:, None, None] * eye
    trace_ratio = np.einsum("jaa->j", blocks) / k
    residual = float(np.abs(blocks - trace_ratio[:, None, None] * eye).max())
    return CompatibilityData(residual, trace_ratio)


def embed_to_patch(
    wm: WarpedMetric,
    r_start: int = 0,
    num_theta: int = 17,
    num_phi: int = 17,
    theta_span: tuple = (0.9, 2.2),
    phi_span: tuple = (0.0, 1.2),
) -> MetricField:
    """Express a tube metric over a product coordinate band as a patch.

    Axes are (theta, phi, r) with r last, so the r = 1 boundary sphere is
    the patch boundary face.  The radial nodes are wm.r[r_start:], shared
    exactly with the one-dimensional grid; the theta span must stay inside
    (0, pi) so the fiber chart is nondegenerate.  Tubes with n = 3 only:
    caps need a pole chart and higher n a bigger patch than the
    finite-difference kernel budgets for.
    """
    if wm.n != 3:
        raise ValueError(f"patch embedding supports n = 3 only, got n = {wm.n}")
    if wm.domain != "tube":
        raise ValueError("patch embedding supports tubes only")
    if not 0 <= r_start <= wm.N + 1 - 5:
        raise ValueError(f"r_start = {r_start} leaves fewer than 5 radial nodes")
    if num_theta < 5 or num_phi < 5:
        raise ValueError("fiber axes need at least 5 nodes")
    th_lo, th_hi = float(theta_span[0]), float(theta_span[1])
    ph_lo, ph_hi = float(phi_span[0]), float(phi_span[1])
    if not (0.0 < th_lo < th_hi < math.pi):
        raise ValueError(f"theta span must stay inside (0, pi), got {theta_span}")
    if not ph_lo < ph_hi:
        raise ValueError(f"phi span must be increasing, got {phi_span}")
    f_band = wm.f[r_start:]
    h_band = wm.h[r_start:]
    thetas = np.linspace(th_lo, th_hi, num_theta)
    shape = (num_theta, num_phi, f_band.size)
    g = np.zeros(shape + (3, 3))
    f_sq = f_band**2
    g[..., 0, 0] = f_sq
    g[..., 1, 1] = f_sq * np.sin(thetas[:, None, None]) ** 2
    g[..., 2, 2] = h_band**2
    spacings = (
        thetas[1] - thetas[0],
        (ph_hi - ph_lo) / (num_phi - 1),
        wm.dr,
    )
    return MetricField(CoordinatePatch(3, shape, spacings), g)
