"""Coordinate-patch curvature kernel: flat limits, convergence, boundary data."""

import numpy as np
import pytest

from yamflow.cases import make_perturbed_cylinder
from yamflow.patch_geometry import (
    CoordinatePatch,
    MetricField,
    boundary_geometry,
    boundary_normal,
    boundary_term_formulas,
    curvature_bundle,
    dump_csv,
    integrate,
    laplace_beltrami,
    orthonormal_boundary_frame,
    trusted_mask,
    verify_normal_evolution,
)
from yamflow.warped import (
    WarpedMetric,
    boundary_data,
    embed_to_patch,
    radial_laplacian,
    warped_curvature,
)


def _box_patch(extents, spans):
    spacings = tuple(s / (e - 1) for e, s in zip(extents, spans))
    return CoordinatePatch(len(extents), extents, spacings)


def _coords(extents, spans, origins=None):
    if origins is None:
        origins = (0.0,) * len(extents)
    axes = [np.linspace(o, o + s, e) for o, s, e in zip(origins, spans, extents)]
    return np.meshgrid(*axes, indexing="ij")


def _sphere_field(N):
    # round unit three-sphere on a chart away from the coordinate poles,
    # axes (theta, phi, chi) with the chi = const boundary face last
    extents, spans, origins = (N, N, N), (1.2, 0.6, 0.6), (0.7, 0.1, 0.6)
    TH, PH, CH = _coords(extents, spans, origins)
    g = np.zeros(extents + (3, 3))
    g[..., 0, 0] = np.sin(CH) ** 2
    g[..., 1, 1] = np.sin(CH) ** 2 * np.sin(TH) ** 2
    g[..., 2, 2] = 1.0
    return MetricField(_box_patch(extents, spans), g)


def _random_patch(seed=2026, extents=(13, 13, 9), amp=0.08):
    """Smooth random metric whose mixed normal components vanish to second
    order at the boundary face, together with a scalar field whose normal
    derivative is exactly annihilated by the face stencil."""
    spans = (1.0, 1.0, 0.5)
    X, Y, Z = _coords(extents, spans)
    rng = np.random.default_rng(seed)

    def smooth():
        a = rng.uniform(-1.0, 1.0, 3)
        ph = rng.uniform(0.0, 2.0 * np.pi, 3)
        return (a[0] * np.sin(X + ph[0]) + a[1] * np.cos(Y + ph[1])
                + a[2] * np.sin(X + Y + Z + ph[2])) / 3.0

    fade = ((spans[2] - Z) / spans[2]) ** 2
    g = np.zeros(extents + (3, 3))
    for i in range(3):
        g[..., i, i] = 1.0 + amp * smooth()
    g[..., 0, 1] = g[..., 1, 0] = amp * smooth()
    g[..., 0, 2] = g[..., 2, 0] = amp * smooth() * fade
    g[..., 1, 2] = g[..., 2, 1] = amp * smooth() * fade
    m = MetricField(_box_patch(extents, spans), g)
    u = (1.0 + 0.3 * np.sin(X + 0.5) * np.cos(Y - 0.2)) * (
        1.0 + 0.4 * (Z - spans[2]) ** 2)
    return m, u


def test_patch_validation():
    with pytest.raises(ValueError, match="at least 3"):
        CoordinatePatch(2, (9, 9), (0.1, 0.1))
    with pytest.raises(ValueError, match="not supported"):
        CoordinatePatch(5, (9,) * 5, (0.1,) * 5)
    with pytest.raises(ValueError, match="per axis"):
        CoordinatePatch(3, (9, 9), (0.1, 0.1, 0.1))
    with pytest.raises(ValueError, match="at least 5"):
        CoordinatePatch(3, (9, 9, 4), (0.1, 0.1, 0.1))
    with pytest.raises(ValueError, match="positive"):
        CoordinatePatch(3, (9, 9, 9), (0.1, 0.1, 0.0))


def test_metric_field_validation():
    patch = _box_patch((5, 5, 5), (1.0, 1.0, 1.0))
    eye = np.broadcast_to(np.eye(3), (5, 5, 5, 3, 3)).copy()
    with pytest.raises(ValueError, match="shape"):
        MetricField(patch, np.zeros((5, 5, 4, 3, 3)))
    bad = eye.copy()
    bad[2, 2, 2, 0, 1] = 0.5
    with pytest.raises(ValueError, match="symmetric"):
        MetricField(patch, bad)
    bad = eye.copy()
    bad[2, 2, 2] = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError, match="positive definite"):
        MetricField(patch, bad)
    m = MetricField(patch, eye)
    with pytest.raises(ValueError):
        m.g[0, 0, 0, 0, 0] = 2.0


def test_trusted_mask_pattern():
    patch = _box_patch((6, 7, 5), (1.0, 1.0, 1.0))
    mask = trusted_mask(patch)
    assert mask.shape == (6, 7, 5)
    assert mask[3, 3, 2] and mask[3, 3, -1]
    assert not mask[0, 3, 3] and not mask[3, 0, 3] and not mask[3, 3, 0]
    assert not mask[0, 3, -1]


@pytest.mark.parametrize("rotated", [False, True])
def test_flat_metric_annihilated(rotated):
    extents = (7, 7, 7)
    base = np.eye(3)
    if rotated:
        rng = np.random.default_rng(7)
        a = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        base = a.T @ a
    g = np.broadcast_to(base, extents + (3, 3)).copy()
    bundle = curvature_bundle(MetricField(_box_patch(extents, (1.0, 1.0, 1.0)), g))
    assert np.abs(bundle.christoffels).max() <= 1e-12
    assert np.abs(bundle.ricci).max() <= 1e-12
    assert np.abs(bundle.scalar).max() <= 1e-12
    assert np.abs(bundle.traceless_norm_sq).max() <= 1e-12


def test_round_sphere_scalar_convergence():
    errs = []
    for N in (17, 33, 65):
        bundle = curvature_bundle(_sphere_field(N))
        errs.append(float(np.abs(bundle.scalar - 6.0)[bundle.trusted].max()))
    order = np.log2(errs[1] / errs[2])
    assert errs[2] < errs[1] < errs[0]
    assert order >= 1.8


def test_traceless_ricci_consistency():
    m = _sphere_field(17)
    bundle = curvature_bundle(m)
    ginv = np.linalg.inv(m.g)
    trace = np.einsum("...ij,...ij->...", ginv, bundle.traceless_ricci)
    assert np.abs(trace[bundle.trusted]).max() <= 1e-10
    ric_sq = np.einsum("...ij,...kl,...ik,...jl->...",
                       bundle.ricci, bundle.ricci, ginv, ginv)
    decomposed = bundle.traceless_norm_sq + bundle.scalar**2 / 3.0
    mask = bundle.trusted
    assert np.allclose(ric_sq[mask], decomposed[mask], rtol=1e-9, atol=1e-12)


def test_frame_orthonormality():
    rng = np.random.default_rng(11)
    a = np.eye(3) + 0.25 * rng.standard_normal((4, 4, 3, 3))
    g_face = np.einsum("...ki,...kj->...ij", a, a)
    frame = orthonormal_boundary_frame(g_face)
    gram = np.einsum("...ai,...ij,...bj->...ab", frame, g_face, frame)
    assert np.abs(gram - np.eye(3)).max() <= 1e-12
    nu = boundary_normal(g_face)
    assert np.allclose(frame[..., -1, :], nu, rtol=0.0, atol=1e-12)
    # the normal is metric-orthogonal to the coordinate tangents and outward
    assert np.abs(np.einsum("...ij,...j->...i", g_face, nu)[..., :-1]).max() <= 1e-12
    assert np.all(nu[..., -1] > 0.0)


def test_normal_evolution_second_order_in_time():
    m, _ = _random_patch()
    report = verify_normal_evolution(m, dt=2e-3)
    assert report.max_residual < 1e-10
    assert report.observed_order >= 1.8
    with pytest.raises(ValueError, match="positive definite"):
        verify_normal_evolution(m, dt=1e3)


def test_boundary_term_formulas_on_random_patch():
    m, u = _random_patch()
    report = boundary_term_formulas(m, u)
    assert report.neumann_residual <= 1e-12
    assert report.identity_residual <= 1e-9
    assert np.array_equal(report.velocity_normal_derivative,
                          -2.0 * report.frame_sum)
    assert np.allclose(report.ric_grad_normal, report.frame_sum,
                       rtol=0.0, atol=1e-9)


def test_boundary_term_formulas_rejects_sloped_function():
    m, u = _random_patch()
    Z = _coords(m.patch.extents, (1.0, 1.0, 0.5))[2]
    with pytest.raises(ValueError, match="normal derivative"):
        boundary_term_formulas(m, u + 0.1 * Z)


def test_embedded_tube_cross_oracle_convergence():
    # the patch kernel and the warped closed path measure the same scalar
    errs = []
    for N in (32, 64):
        wm = make_perturbed_cylinder(n=3, amplitude=0.1, N=N)
        # nothing depends on phi, so that axis does not need refining
        m = embed_to_patch(wm, r_start=0, num_theta=N + 1, num_phi=9)
        bundle = curvature_bundle(m)
        want = warped_curvature(wm).scalar
        diff = np.abs(bundle.scalar - want[None, None, :])
        errs.append(float(diff[bundle.trusted].max()))
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_embedded_tube_mean_curvature_cross_check():
    N = 48
    r = np.linspace(0.0, 1.0, N + 1)
    wm = WarpedMetric(3, "tube", np.ones(N + 1), 1.0 + 0.2 * r)
    m = embed_to_patch(wm, r_start=0, num_theta=33, num_phi=33)
    bg = boundary_geometry(m)
    want = boundary_data(wm).mean_curvature["right"]
    assert np.abs(bg.mean_curvature[bg.trusted] - want).max() <= 1e-10
    # area element of the boundary two-sphere chart: f^2 sin(theta)
    thetas = np.linspace(0.9, 2.2, 33)
    assert np.allclose(bg.area_element, wm.f[-1] ** 2 * np.sin(thetas)[:, None],
                       rtol=1e-12, atol=0.0)


def test_laplacian_cross_oracle_convergence():
    errs = []
    for N in (32, 64):
        wm = make_perturbed_cylinder(n=3, amplitude=0.1, N=N)
        m = embed_to_patch(wm, r_start=0, num_theta=N + 1, num_phi=9)
        u_rad = np.cos(np.pi * np.linspace(0.0, 1.0, N + 1))
        u = np.broadcast_to(u_rad, m.patch.shape).copy()
        lap, grad, grad_sq = laplace_beltrami(m, u)
        want = radial_laplacian(wm, u_rad).laplacian
        bundle = curvature_bundle(m)
        errs.append(float(np.abs(lap - want[None, None, :])[bundle.trusted].max()))
        # a radial function has a radial gradient: angular components vanish
        assert np.abs(grad[..., :2]).max() <= 1e-12
        assert np.all(grad_sq >= 0.0)
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_laplacian_shape_validation():
    m, _ = _random_patch()
    with pytest.raises(ValueError, match="shape"):
        laplace_beltrami(m, np.zeros((3, 3, 3)))


def test_integrate_flat_box():
    extents, spans = (9, 9, 9), (1.0, 2.0, 0.5)
    g = np.broadcast_to(np.eye(3), extents + (3, 3)).copy()
    m = MetricField(_box_patch(extents, spans), g)
    assert integrate(m, np.ones(extents)) == pytest.approx(1.0, rel=1e-13)
    assert integrate(m, np.ones(extents[:2]), region="boundary") == pytest.approx(
        2.0, rel=1e-13)
    with pytest.raises(ValueError, match="region"):
        integrate(m, np.ones(extents), region="edge")
    with pytest.raises(ValueError, match="shape"):
        integrate(m, np.ones((4, 4, 4)))
    with pytest.raises(ValueError, match="shape"):
        integrate(m, np.ones((4, 4)), region="boundary")


def test_dump_csv_header(tmp_path):
    m, _ = _random_patch(extents=(5, 5, 5))
    out = tmp_path / "patch.csv"
    dump_csv(m, out)
    header = out.read_text().splitlines()[0]
    assert header.startswith("i0,i1,i2,g_00")
    assert "scalar" in header and "trusted" in header
