"""Reference geometries with known closed-form curvature.

Each constructor returns a WarpedMetric on the uniform grid over [0, 1].
The closed forms quoted in the docstrings are what the test suite checks
the finite-difference operators against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .warped import WarpedMetric, sphere_area
from .warped import volume as warped_volume

__all__ = [
    "make_cylinder",
    "make_hemisphere",
    "make_truncated_cap",
    "make_perturbed_cylinder",
    "ShrinkingCylinder",
    "ShrinkingCap",
    "CASE_BUILDERS",
]


def make_cylinder(
    n: int = 3, radius: float = 1.0, length: float = 1.0, N: int = 128,
    unit_volume: bool = False,
) -> WarpedMetric:
    """Round cylinder [0, L] x S^{n-1}(c): f = c, h = L.

    Curvature: lambda_radial = 0, lambda_sphere = (n-2)/c^2, so the scalar
    curvature is (n-1)(n-2)/c^2 and both boundary spheres are minimal.
    With unit_volume the length is adjusted so the total volume is 1,
    leaving the radius (hence the curvature) untouched.
    """
    if radius <= 0 or length <= 0:
        raise ValueError("radius and length must be positive")
    if unit_volume:
        length = 1.0 / (sphere_area(n - 1) * radius ** (n - 1))
    nodes = N + 1
    return WarpedMetric(n, "tube", np.full(nodes, length), np.full(nodes, radius))


def make_hemisphere(
    n: int = 3, radius: float = 1.0, N: int = 128, unit_volume: bool = False
) -> WarpedMetric:
    """Round hemisphere of radius a: f = a sin(pi r / 2), h = a pi / 2.

    Einstein with both Ricci eigenvalues (n-1)/a^2; the equatorial boundary
    sphere is totally geodesic.  With unit_volume the radius is set to
    (half the volume of the unit round n-sphere)^(-1/n); for n = 3 that is
    a = pi^(-2/3).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if unit_volume:
        radius = (sphere_area(n) / 2.0) ** (-1.0 / n)
    r = np.linspace(0.0, 1.0, N + 1)
    f = radius * np.sin(0.5 * math.pi * r)
    f[0] = 0.0
    return WarpedMetric(n, "cap", np.full(N + 1, radius * 0.5 * math.pi), f)


def make_truncated_cap(
    n: int = 3, radius: float = 1.0, polar_angle: float = math.pi / 3, N: int = 128
) -> WarpedMetric:
    """Geodesic ball of polar angle phi_1 in the round n-sphere of radius a.

    f = a sin(phi_1 r), h = a phi_1.  The boundary sphere has mean
    curvature (n-1) cot(phi_1) / a toward the outward normal, so this is
    the stock example of a boundary that is not minimal.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0.0 < polar_angle < math.pi:
        raise ValueError(f"polar angle must lie in (0, pi), got {polar_angle}")
    r = np.linspace(0.0, 1.0, N + 1)
    f = radius * np.sin(polar_angle * r)
    f[0] = 0.0
    return WarpedMetric(n, "cap", np.full(N + 1, radius * polar_angle), f)


def make_perturbed_cylinder(
    n: int = 3, N: int = 128, amplitude: float = 0.05, unit_volume: bool = True
) -> WarpedMetric:
    """Cylinder with a cosine ripple in the sphere radius.

    f = 1 + amplitude cos(2 pi r), h = 1.  Every odd r-derivative of the
    ripple vanishes at r = 0 and r = 1, so both boundary spheres are
    exactly minimal and the profile extends evenly through the ends, while
    the curvature is genuinely non-constant in r.  unit_volume rescales h
    and f by a common factor, which preserves both properties.
    """
    if not 0.0 <= amplitude < 1.0:
        raise ValueError(f"amplitude must lie in [0, 1), got {amplitude}")
    r = np.linspace(0.0, 1.0, N + 1)
    f = 1.0 + amplitude * np.cos(2.0 * math.pi * r)
    h = np.ones(N + 1)
    if unit_volume:
        raw = WarpedMetric(n, "tube", h, f)
        scale = warped_volume(raw) ** (-1.0 / n)
        h = h * scale
        f = f * scale
    return WarpedMetric(n, "tube", h, f)


@dataclass(frozen=True)
class ShrinkingCylinder:
    """Exact Ricci flow through round cylinders.

    f(t) = sqrt(c0^2 - 2 (n-2) t), h fixed; the fiber sphere collapses at
    t = c0^2 / (2 (n-2)).
    """

    n: int = 3
    radius: float = 1.0
    length: float = 1.0
    N: int = 128

    @property
    def singular_time(self) -> float:
        return self.radius**2 / (2.0 * (self.n - 2))

    def radius_at(self, t: float) -> float:
        if t >= self.singular_time:
            raise ValueError(f"t = {t} is at or past the singular time")
        return math.sqrt(self.radius**2 - 2.0 * (self.n - 2) * t)

    def metric_at(self, t: float) -> WarpedMetric:
        return make_cylinder(self.n, self.radius_at(t), self.length, self.N)


@dataclass(frozen=True)
class ShrinkingCap:
    """Exact Ricci flow through round hemispheres (shrinking round sphere).

    The radius obeys a(t) = sqrt(a0^2 - 2 (n-1) t), collapsing at
    t = a0^2 / (2 (n-1)); the equator stays totally geodesic throughout.
    """

    n: int = 3
    radius: float = 1.0
    N: int = 128

    @property
    def singular_time(self) -> float:
        return self.radius**2 / (2.0 * (self.n - 1))

    def radius_at(self, t: float) -> float:
        if t >= self.singular_time:
            raise ValueError(f"t = {t} is at or past the singular time")
        return math.sqrt(self.radius**2 - 2.0 * (self.n - 1) * t)

    def metric_at(self, t: float) -> WarpedMetric:
        return make_hemisphere(self.n, self.radius_at(t), self.N)


# Named geometries addressable from configuration files and the command
# line; each builder takes (n, N) plus its own keyword parameters.
CASE_BUILDERS = {
    "cylinder": make_cylinder,
    "hemisphere": make_hemisphere,
    "perturbed_cylinder": make_perturbed_cylinder,
}
