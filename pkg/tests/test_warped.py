"""Warped-metric geometry: curvature, quadrature, transforms, serialization."""

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import cap_metrics, tube_metrics, warped_metrics
from yamflow.cases import (
    make_cylinder,
    make_hemisphere,
    make_perturbed_cylinder,
    make_truncated_cap,
)
from yamflow.warped import (
    WarpedMetric,
    boundary_data,
    class_curvature,
    compatibility_residual,
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


def test_sphere_area_closed_values():
    assert sphere_area(1) == pytest.approx(2.0 * math.pi, rel=1e-14)
    assert sphere_area(2) == pytest.approx(4.0 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(2.0 * math.pi**2, rel=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_cylinder_curvature_closed_form(n):
    c, L = 0.7, 1.3
    wm = make_cylinder(n=n, radius=c, length=L, N=64)
    curv = warped_curvature(wm)
    assert np.abs(curv.lambda_radial).max() < 1e-11
    assert curv.lambda_sphere == pytest.approx(
        np.full(65, (n - 2) / c**2), abs=1e-11)
    assert curv.scalar == pytest.approx(
        np.full(65, (n - 1) * (n - 2) / c**2), abs=1e-10)


@pytest.mark.parametrize("n", [3, 4])
def test_hemisphere_is_einstein(n):
    a = 0.9
    wm = make_hemisphere(n=n, radius=a, N=96)
    curv = warped_curvature(wm)
    want = (n - 1) / a**2
    assert np.abs(curv.lambda_radial - want).max() < 1e-6
    assert np.abs(curv.lambda_sphere - want).max() < 1e-6
    assert curv.tracefree_norm_sq.max() < 1e-12


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_round_cap_einstein_detection(radius):
    wm = make_truncated_cap(n=3, radius=radius, polar_angle=1.1, N=96)
    assert warped_curvature(wm).tracefree_norm_sq.max() < 1e-8


def test_truncated_cap_mean_curvature_closed_form():
    a, phi = 1.2, math.pi / 3
    wm = make_truncated_cap(n=3, radius=a, polar_angle=phi, N=128)
    bd = boundary_data(wm)
    assert bd.sides == ("right",)
    want = (3 - 1) * math.cos(phi) / (a * math.sin(phi))
    assert bd.mean_curvature["right"] == pytest.approx(want, rel=1e-9)
    assert bd.sphere_radius["right"] == pytest.approx(a * math.sin(phi), rel=1e-14)
    assert bd.boundary_area["right"] == pytest.approx(
        sphere_area(2) * (a * math.sin(phi)) ** 2, rel=1e-12)


def test_cylinder_boundaries_exactly_minimal():
    bd = boundary_data(make_cylinder(N=48))
    assert bd.mean_curvature["left"] == 0.0
    assert bd.mean_curvature["right"] == 0.0


@given(warped_metrics())
@settings(max_examples=25, deadline=None)
def test_trace_identities_pointwise(wm):
    curv = warped_curvature(wm)
    n = wm.n
    scalar = curv.lambda_radial + (n - 1) * curv.lambda_sphere
    assert np.allclose(curv.scalar, scalar, rtol=0.0, atol=1e-9 * _scale(scalar))
    mean = curv.scalar / n
    tracefree = (curv.lambda_radial - mean) ** 2 + (n - 1) * (
        curv.lambda_sphere - mean) ** 2
    assert np.allclose(curv.tracefree_norm_sq, tracefree,
                       rtol=1e-12, atol=1e-12 * _scale(tracefree))


def _scale(arr):
    return max(1.0, float(np.abs(arr).max()))


@given(warped_metrics())
@settings(max_examples=25, deadline=None)
def test_ricci_norm_decomposition(wm):
    # |Ric|^2 = |Ric0|^2 + R^2/n, assembled from the eigenvalue pair
    curv = warped_curvature(wm)
    n = wm.n
    ric_sq = curv.lambda_radial**2 + (n - 1) * curv.lambda_sphere**2
    decomposed = curv.tracefree_norm_sq + curv.scalar**2 / n
    assert np.allclose(ric_sq, decomposed, rtol=1e-9, atol=1e-9 * _scale(ric_sq))


def test_class_curvature_matches_measurement_at_high_order():
    # parity closure and one-sided measurement see the same smooth profile;
    # their disagreement is pure truncation and shrinks at the stencil order
    diffs = []
    for N in (32, 64, 128):
        wm = make_perturbed_cylinder(n=3, amplitude=0.1, N=N)
        meas = warped_curvature(wm).scalar
        cls = class_curvature(wm).scalar
        diffs.append(np.abs(meas - cls)[6:-6].max())
    assert diffs[1] < diffs[0] / 16.0
    assert diffs[2] < diffs[1] / 16.0


@given(tube_metrics())
@settings(max_examples=25, deadline=None)
def test_class_curvature_tracks_measurement_on_class_metrics(wm):
    meas = warped_curvature(wm).scalar
    cls = class_curvature(wm).scalar
    assert np.abs(meas - cls).max() < 5e-3 * _scale(meas)


@given(warped_metrics())
@settings(max_examples=25, deadline=None)
def test_volume_positive_and_weights_nonnegative(wm):
    assert volume(wm) > 0.0
    w = radial_weights(wm)
    assert w.shape == wm.f.shape
    assert np.all(w >= 0.0)
    # integrating 1 against the weights is the volume
    assert integrate_radial(wm, np.ones_like(wm.f)) == pytest.approx(
        volume(wm), rel=1e-12)


def test_volume_closed_forms():
    c, L = 0.8, 1.7
    assert volume(make_cylinder(n=3, radius=c, length=L, N=32)) == pytest.approx(
        sphere_area(2) * c**2 * L, rel=1e-12)
    # trapezoid sums of even trigonometric profiles converge spectrally
    assert volume(make_hemisphere(n=3, unit_volume=True, N=128)) == pytest.approx(
        1.0, abs=1e-10)
    assert volume(make_perturbed_cylinder(n=3, N=128)) == pytest.approx(
        1.0, abs=1e-12)


def test_integrate_boundary_cylinder():
    wm = make_cylinder(n=3, radius=0.5, N=32)
    ones = np.ones_like(wm.f)
    # both boundary spheres have area 4 pi c^2
    assert integrate_boundary(wm, ones) == pytest.approx(
        2.0 * sphere_area(2) * 0.25, rel=1e-12)


def test_radial_laplacian_constant_annihilated():
    wm = make_perturbed_cylinder(N=64)
    lap = radial_laplacian(wm, np.full(65, 3.7))
    assert np.all(lap.laplacian == 0.0)
    assert np.all(lap.radial_slope == 0.0)
    assert np.all(lap.gradient_sq == 0.0)


def test_radial_laplacian_cylinder_mode():
    # on f = c, h = L: lap u = u_rr / L^2, and cos(pi r) is a Neumann mode
    N, L = 96, 1.3
    wm = make_cylinder(n=3, radius=1.0, length=L, N=N)
    r = np.linspace(0.0, 1.0, N + 1)
    u = np.cos(math.pi * r)
    lap = radial_laplacian(wm, u)
    want = -(math.pi / L) ** 2 * u
    assert np.abs(lap.laplacian - want).max() < 1e-6


def test_radial_laplacian_cap_pole_regular():
    wm = make_hemisphere(n=3, N=96)
    r = np.linspace(0.0, 1.0, 97)
    u = 1.0 + 0.3 * np.cos(math.pi * r)
    lap = radial_laplacian(wm, u)
    assert np.all(np.isfinite(lap.laplacian))
    # pole limit of the laplacian of a smooth even function: n u_ss(0)
    u_rr0 = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / wm.dr**2
    rough = 3.0 * u_rr0 / wm.h[0] ** 2
    assert lap.laplacian[0] == pytest.approx(rough, rel=5e-2)


def test_conformal_transform_scaling_law():
    wm = make_cylinder(n=4, radius=0.9, N=48)
    w = np.full(49, 1.3)
    out = conformal_transform(wm, w)
    scale = 1.3 ** (2.0 / (4 - 2))
    assert np.allclose(out.f, wm.f * scale, rtol=1e-14)
    assert np.allclose(out.h, wm.h * scale, rtol=1e-14)


def test_conformal_transform_warns_on_sloped_factor():
    wm = make_cylinder(N=48)
    r = np.linspace(0.0, 1.0, 49)
    w = 1.0 + 0.2 * r  # nonzero slope at both ends
    with pytest.warns(UserWarning, match="normal slope"):
        conformal_transform(wm, w)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        conformal_transform(wm, w, check_boundary_slope=False)


def test_conformal_transform_validation():
    wm = make_cylinder(N=48)
    with pytest.raises(ValueError, match="positive"):
        conformal_transform(wm, np.full(49, -1.0))
    with pytest.raises(ValueError, match="shape"):
        conformal_transform(wm, np.ones(10))


def test_conformal_mean_curvature_law():
    # H' = w^{-2/(n-2)} H for factors with flat normal slope at the boundary
    a, phi = 1.0, 1.0
    wm = make_truncated_cap(n=3, radius=a, polar_angle=phi, N=128)
    r = np.linspace(0.0, 1.0, 129)
    w = 1.0 + 0.25 * np.cos(math.pi * r) ** 2  # slope 0 at r = 0, 1
    out = conformal_transform(wm, w, check_boundary_slope=False)
    H_old = boundary_data(wm).mean_curvature["right"]
    H_new = boundary_data(out).mean_curvature["right"]
    assert H_new == pytest.approx(w[-1] ** (-2.0 / (3 - 2)) * H_old, rel=1e-8)


def test_normalize_zero_mean_curvature_on_cap():
    wm = make_truncated_cap(n=3, radius=1.0, polar_angle=1.0, N=96)
    normalized = normalize_zero_mean_curvature(wm)
    bd = boundary_data(normalized.metric)
    assert abs(bd.mean_curvature["right"]) <= 1e-10
    assert np.all(normalized.conformal_factor > 0.0)
    # idempotence: a second pass has nothing to do
    again = normalize_zero_mean_curvature(normalized.metric)
    bd2 = boundary_data(again.metric)
    assert abs(bd2.mean_curvature["right"]) <= 1e-6
    assert np.abs(again.conformal_factor - 1.0).max() <= 1e-6


def test_normalize_zero_mean_curvature_noop_on_minimal():
    wm = make_perturbed_cylinder(N=64)
    normalized = normalize_zero_mean_curvature(wm, tol=1e-7)
    assert normalized.metric is wm
    assert np.all(normalized.conformal_factor == 1.0)


@given(warped_metrics())
@settings(max_examples=20, deadline=None)
def test_compatibility_residual_vanishes(wm):
    data = compatibility_residual(wm)
    assert data.residual <= 1e-12
    assert np.allclose(data.trace_ratio, warped_curvature(wm).lambda_sphere,
                       rtol=1e-12, atol=1e-12)


@given(warped_metrics())
@settings(max_examples=25, deadline=None)
def test_serialization_round_trip(wm):
    data = wm.to_dict()
    assert set(data) == {"n", "domain", "N", "h", "f"}
    clone = WarpedMetric.from_dict(
        json.loads(json.dumps(data)), pole_tol=wm.pole_tol)
    assert clone.n == wm.n and clone.domain == wm.domain
    assert np.array_equal(clone.h, wm.h)
    assert np.array_equal(clone.f, wm.f)


def test_from_dict_validation():
    data = make_cylinder(N=32).to_dict()
    bad = dict(data)
    bad["N"] = 99
    with pytest.raises(ValueError, match="N must equal"):
        WarpedMetric.from_dict(bad)
    bad = dict(data)
    bad["extra"] = 1
    with pytest.raises(ValueError, match="keys"):
        WarpedMetric.from_dict(bad)
    bad = {k: v for k, v in data.items() if k != "f"}
    with pytest.raises(ValueError, match="keys"):
        WarpedMetric.from_dict(bad)


def test_metric_validation_errors():
    ones = np.ones(33)
    with pytest.raises(ValueError, match="domain"):
        WarpedMetric(3, "disk", ones, ones)
    with pytest.raises(TypeError, match="integer"):
        WarpedMetric(3.0, "tube", ones, ones)
    with pytest.raises(ValueError, match=">= 3"):
        WarpedMetric(2, "tube", ones, ones)
    with pytest.raises(ValueError, match="positive"):
        WarpedMetric(3, "tube", ones, -ones)
    with pytest.raises(ValueError, match="must match"):
        WarpedMetric(3, "tube", ones, np.ones(34))
    with pytest.raises(ValueError, match="non-finite"):
        WarpedMetric(3, "tube", ones, np.full(33, np.nan))
    f_cap = np.linspace(0.0, 1.0, 33)
    with pytest.raises(ValueError, match="f\\(0\\) == 0"):
        WarpedMetric(3, "cap", ones, f_cap + 0.5)
    # incompatible pole data: f climbs twice as fast as h allows
    with pytest.raises(ValueError, match="pole"):
        WarpedMetric(3, "cap", 0.5 * ones, f_cap)


def test_metric_arrays_frozen():
    wm = make_cylinder(N=32)
    with pytest.raises(ValueError):
        wm.f[0] = 2.0


def test_embed_to_patch_layout_and_validation():
    wm = make_perturbed_cylinder(n=3, N=64)
    patch = embed_to_patch(wm, r_start=48, num_theta=9, num_phi=9)
    assert patch.patch.shape == (9, 9, 17)
    g = patch.g
    # diagonal warped-product components, r last
    assert np.allclose(g[..., 0, 0], wm.f[48:] ** 2)
    assert np.allclose(g[..., 2, 2], wm.h[48:] ** 2)
    assert np.all(g[..., 0, 1] == 0.0)

    with pytest.raises(ValueError, match="n = 3"):
        embed_to_patch(make_cylinder(n=4, N=32))
    with pytest.raises(ValueError, match="tubes"):
        embed_to_patch(make_hemisphere(N=32))
    with pytest.raises(ValueError, match="theta span"):
        embed_to_patch(wm, theta_span=(0.0, 2.0))
    with pytest.raises(ValueError, match="fewer than 5"):
        embed_to_patch(wm, r_start=63)


def test_builder_validation():
    with pytest.raises(ValueError):
        make_cylinder(radius=-1.0)
    with pytest.raises(ValueError):
        make_hemisphere(radius=0.0)
    with pytest.raises(ValueError):
        make_truncated_cap(polar_angle=math.pi)
    with pytest.raises(ValueError):
        make_perturbed_cylinder(amplitude=1.0)


@given(tube_metrics())
@settings(max_examples=25, deadline=None)
def test_class_tubes_carry_positive_scalar_somewhere(wm):
    # with both boundary spheres minimal, the profile has an interior or
    # edge maximum where the fiber direction forces positive curvature
    assert class_curvature(wm).scalar.max() > 0.0
