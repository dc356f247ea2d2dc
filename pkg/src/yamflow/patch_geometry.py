"""Finite-difference tensor calculus on coordinate patches.

A patch is a uniform n-dimensional grid carrying a metric tensor per node,
with the upper face of the last axis designated as the boundary.  Curvature
is assembled algebraically from first and second metric derivatives, so the
stencil radius stays 1 and the scheme is second order on trusted nodes:
interior nodes with centered stencils in every axis, plus boundary-face
nodes that are interior in the tangential axes (one-sided normal stencils).

Sign conventions: the round sphere has positive scalar curvature, the
Laplacian is the metric trace of the Hessian, and the mean curvature of a
convex boundary with outward normal is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# one-sided second-order edge weights for first and second derivatives
_D1_EDGE = np.array([-1.5, 2.0, -0.5])
_D2_EDGE = np.array([2.0, -5.0, 4.0, -1.0])

SPD_TOL = 1e-12


@dataclass(frozen=True)
class CoordinatePatch:
    """Uniform grid with the boundary at the upper face of the last axis."""

    n: int
    extents: tuple
    spacings: tuple

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        if self.n > 4:
            raise ValueError("patches above dimension 4 are not supported")
        if len(self.extents) != self.n or len(self.spacings) != self.n:
            raise ValueError("extents and spacings must have one entry per axis")
        if any(int(e) < 5 for e in self.extents):
            raise ValueError("every axis needs at least 5 nodes")
        if any(s <= 0 for s in self.spacings):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        object.__setattr__(self, "spacings", tuple(float(s) for s in self.spacings))

    @property
    def shape(self) -> tuple:
        return self.extents


@dataclass(frozen=True)
class MetricField:
    """Symmetric positive-definite metric tensor sampled on a patch."""

    patch: CoordinatePatch
    g: np.ndarray  # shape extents + (n, n)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        n = self.patch.n
        if g.shape != self.patch.shape + (n, n):
            raise ValueError("metric array shape does not match patch")
        if not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-13, rtol=0.0):
            raise ValueError("metric must be symmetric at every node")
        if np.linalg.eigvalsh(g).min() <= SPD_TOL:
            raise ValueError("metric must be positive definite at every node")
        g = g.copy()
        g.flags.writeable = False
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class CurvatureBundle:
    """Christoffels, Ricci, scalar and traceless-Ricci fields on a patch."""

    christoffels: np.ndarray      # extents + (n, n, n), index order k,i,j
    ricci: np.ndarray             # extents + (n, n)
    scalar: np.ndarray            # extents
    traceless_ricci: np.ndarray   # extents + (n, n)
    traceless_norm_sq: np.ndarray  # extents
    trusted: np.ndarray           # extents, bool


@dataclass(frozen=True)
class BoundaryGeometry:
    """Outward normal and second-fundamental data on the boundary face."""

    normal: np.ndarray          # face shape + (n,), contravariant components
    mean_curvature: np.ndarray  # face shape
    induced_metric: np.ndarray  # face shape + (n-1, n-1)
    area_element: np.ndarray    # face shape
    trusted: np.ndarray         # face shape, bool


def _diff1(field: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Central first derivative, second-order one-sided at the axis faces."""
    out = np.empty_like(field)
    lo = [slice(None)] * field.ndim

    def sl(idx):
        s = list(lo)
        s[axis] = idx
        return tuple(s)

    out[sl(slice(1, -1))] = (field[sl(slice(2, None))] - field[sl(slice(0, -2))]) / (2 * dx)
    out[sl(0)] = (_D1_EDGE[0] * field[sl(0)] + _D1_EDGE[1] * field[sl(1)]
                  + _D1_EDGE[2] * field[sl(2)]) / dx
    out[sl(-1)] = -(_D1_EDGE[0] * field[sl(-1)] + _D1_EDGE[1] * field[sl(-2)]
                    + _D1_EDGE[2] * field[sl(-3)]) / dx
    return out


def _diff2(field: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Central second derivative, second-order one-sided at the axis faces."""
    out = np.empty_like(field)
    lo = [slice(None)] * field.ndim

    def sl(idx):
        s = list(lo)
        s[axis] = idx
        return tuple(s)

    out[sl(slice(1, -1))] = (field[sl(slice(2, None))] - 2 * field[sl(slice(1, -1))]
                             + field[sl(slice(0, -2))]) / dx ** 2
    out[sl(0)] = (_D2_EDGE[0] * field[sl(0)] + _D2_EDGE[1] * field[sl(1)]
                  + _D2_EDGE[2] * field[sl(2)] + _D2_EDGE[3] * field[sl(3)]) / dx ** 2
    out[sl(-1)] = (_D2_EDGE[0] * field[sl(-1)] + _D2_EDGE[1] * field[sl(-2)]
                   + _D2_EDGE[2] * field[sl(-3)] + _D2_EDGE[3] * field[sl(-4)]) / dx ** 2
    return out


def trusted_mask(patch: CoordinatePatch) -> np.ndarray:
    """Nodes whose curvature uses only centered stencils, plus the boundary
    face where only the normal direction is one-sided."""
    mask = np.zeros(patch.shape, dtype=bool)
    interior = tuple(slice(1, -1) for _ in range(patch.n))
    mask[interior] = True
    face = tuple(slice(1, -1) for _ in range(patch.n - 1)) + (-1,)
    mask[face] = True
    return mask


def _metric_derivatives(m: MetricField):
    g = m.g
    n = m.patch.n
    dg = np.stack([_diff1(g, a, m.patch.spacings[a]) for a in range(n)])
    # d2g[a, b] = second partial along axes a, b; same-axis uses the
    # dedicated second-derivative stencil, mixed ones compose first
    # derivatives (still second order)
    d2g = np.empty((n, n) + g.shape)
    for a in range(n):
        d2g[a, a] = _diff2(g, a, m.patch.spacings[a])
        for b in range(a + 1, n):
            mixed = _diff1(dg[a], b, m.patch.spacings[b])
            d2g[a, b] = mixed
            d2g[b, a] = mixed
    return dg, d2g


def curvature_bundle(m: MetricField) -> CurvatureBundle:
    """Second-order curvature fields assembled from metric derivatives."""
    n = m.patch.n
    g = m.g
    ginv = np.linalg.inv(g)
    dg, d2g = _metric_derivatives(m)

    # bracket br[..., i, l, j] = d_i g_lj + d_j g_li - d_l g_ij
    # (dg axes: [derivative, grid..., row, col])
    br = np.einsum("i...lj->...ilj", dg) + np.einsum("j...li->...ilj", dg) \
        - np.einsum("l...ij->...ilj", dg)
    gamma_kij = 0.5 * np.einsum("...kl,...ilj->...kij", ginv, br)

    # d_m Gamma^k_ij assembled algebraically from dg and d2g, so the trusted
    # band stays one stencil radius wide:
    #   (1/2) (d_m g^{kl}) br_ilj + (1/2) g^{kl} d_m br_ilj
    dginv = -np.einsum("...ka,m...ab,...bl->m...kl", ginv, dg, ginv)
    br2 = np.einsum("mi...lj->m...ilj", d2g) + np.einsum("mj...li->m...ilj", d2g) \
        - np.einsum("ml...ij->m...ilj", d2g)
    dgamma = 0.5 * (np.einsum("m...kl,...ilj->m...kij", dginv, br)
                    + np.einsum("...kl,m...ilj->m...kij", ginv, br2))

    # Ric_ij = d_k Gamma^k_ij - d_i Gamma^k_kj + Gamma^k_km Gamma^m_ij
    #        - Gamma^k_im Gamma^m_kj
    ric = (np.einsum("k...kij->...ij", dgamma)
           - np.einsum("i...kkj->...ij", dgamma)
           + np.einsum("...kkm,...mij->...ij", gamma_kij, gamma_kij)
           - np.einsum("...kim,...mkj->...ij", gamma_kij, gamma_kij))
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))

    scalar = np.einsum("...ij,...ij->...", ginv, ric)
    traceless = ric - scalar[..., None, None] / n * g
    norm_sq = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv,
                        traceless, traceless)
    return CurvatureBundle(
        christoffels=gamma_kij,
        ricci=ric,
        scalar=scalar,
        traceless_ricci=traceless,
        traceless_norm_sq=norm_sq,
        trusted=trusted_mask(m.patch),
    )


def laplace_beltrami(m: MetricField, u: np.ndarray, bundle: CurvatureBundle = None):
    """Metric Laplacian of u, with the gradient and its squared norm.

    Returns (laplacian, gradient, grad_norm_sq); gradient is contravariant.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != m.patch.shape:
        raise ValueError("scalar field shape does not match patch")
    n = m.patch.n
    ginv = np.linalg.inv(m.g)
    if bundle is None:
        bundle = curvature_bundle(m)
    du = np.stack([_diff1(u, a, m.patch.spacings[a]) for a in range(n)], axis=-1)
    hess = np.empty(m.patch.shape + (n, n))
    for a in range(n):
        hess[..., a, a] = _diff2(u, a, m.patch.spacings[a])
        for b in range(a + 1, n):
            mixed = _diff1(du[..., a], b, m.patch.spacings[b])
            hess[..., a, b] = mixed
            hess[..., b, a] = mixed
    hess = hess - np.einsum("...kij,...k->...ij", bundle.christoffels, du)
    lap = np.einsum("...ij,...ij->...", ginv, hess)
    grad = np.einsum("...ij,...j->...i", ginv, du)
    grad_sq = np.einsum("...i,...i->...", grad, du)
    return lap, grad, grad_sq


def boundary_normal(g_face: np.ndarray) -> np.ndarray:
    """Outward unit normal (contravariant) at upper-face nodes of the last
    axis: the metric-dual of dx^n, normalized, which is automatically
    orthogonal to the tangential coordinate directions."""
    ginv = np.linalg.inv(g_face)
    gnn = ginv[..., -1, -1]
    return ginv[..., :, -1] / np.sqrt(gnn)[..., None]


def boundary_geometry(m: MetricField, bundle: CurvatureBundle = None) -> BoundaryGeometry:
    """Normal, induced metric, area element and mean curvature at the
    boundary face (upper end of the last axis)."""
    n = m.patch.n
    if bundle is None:
        bundle = curvature_bundle(m)
    face = (slice(None),) * (n - 1) + (-1,)
    g_face = m.g[face]
    induced = g_face[..., : n - 1, : n - 1]
    det = np.linalg.det(induced)
    if det.min() <= 0:
        raise ValueError("induced boundary metric is degenerate")
    nu = boundary_normal(g_face)

    # II_{i'j'} = -<nu, nabla_{i'} d_{j'}> = -nu_k Gamma^k_{i'j'}
    nu_flat = np.einsum("...ij,...j->...i", g_face, nu)
    gamma_face = bundle.christoffels[face]
    second_ff = -np.einsum("...k,...kij->...ij",
                           nu_flat, gamma_face)[..., : n - 1, : n - 1]
    h_mean = np.einsum("...ij,...ij->...", np.linalg.inv(induced), second_ff)
    return BoundaryGeometry(
        normal=nu,
        mean_curvature=h_mean,
        induced_metric=induced,
        area_element=np.sqrt(det),
        trusted=bundle.trusted[face],
    )


def _trapezoid_weights(extent: int, dx: float) -> np.ndarray:
    w = np.full(extent, dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate(m: MetricField, phi: np.ndarray, region: str = "bulk") -> float:
    """Trapezoid quadrature of phi against the metric volume element over
    the whole patch, or against the area element over the boundary face."""
    n = m.patch.n
    phi = np.asarray(phi, dtype=float)
    if region == "bulk":
        if phi.shape != m.patch.shape:
            raise ValueError("scalar field shape does not match patch")
        dens = np.sqrt(np.linalg.det(m.g)) * phi
        for a in range(n):
            w = _trapezoid_weights(m.patch.extents[a], m.patch.spacings[a])
            dens = np.tensordot(dens, w, axes=([0], [0]))
        return float(dens)
    if region == "boundary":
        bg = boundary_geometry(m)
        if phi.shape != m.patch.shape[: n - 1]:
            raise ValueError("boundary field shape does not match face")
        dens = bg.area_element * phi
        for a in range(n - 1):
            w = _trapezoid_weights(m.patch.extents[a], m.patch.spacings[a])
            dens = np.tensordot(dens, w, axes=([0], [0]))
        return float(dens)
    raise ValueError(f"unknown region {region!r}")


def orthonormal_boundary_frame(g_face: np.ndarray) -> np.ndarray:
    """Gram-Schmidt frame (e_1, ..., e_{n-1}, nu) at each boundary node.

    Orthonormalizes the coordinate basis in order, so the first n-1 vectors
    span the boundary tangent space and the last one is the outward normal.
    Returned as frame[..., a, i]: component i of frame vector a.
    """
    n = g_face.shape[-1]
    frame = np.zeros(g_face.shape)
    for a in range(n):
        v = np.zeros(g_face.shape[:-2] + (n,))
        v[..., a] = 1.0
        for b in range(a):
            proj = np.einsum("...ij,...i,...j->...", g_face, frame[..., b, :], v)
            v = v - proj[..., None] * frame[..., b, :]
        norm = np.sqrt(np.einsum("...ij,...i,...j->...", g_face, v, v))
        frame[..., a, :] = v / norm[..., None]
    return frame


@dataclass(frozen=True)
class NormalEvolutionReport:
    """Finite-difference versus formula for the normal's time derivative."""

    max_residual: float
    residual_coarse: float   # at 2*dt, for the convergence order
    observed_order: float
    dt: float


def verify_normal_evolution(m: MetricField, dt: float,
                            bundle: CurvatureBundle = None) -> NormalEvolutionReport:
    """Check d(nu)/dt against 2 sum_i' Ric_{i'nu} e_i' + Ric_{nunu} nu on the
    synthetic family g_t = g - 2t Ric, componentwise in the boundary frame."""
    n = m.patch.n
    if bundle is None:
        bundle = curvature_bundle(m)
    face = (slice(None),) * (n - 1) + (-1,)
    g_face = m.g[face]
    ric_face = bundle.ricci[face]
    trusted = bundle.trusted[face]

    def nu_at(t: float) -> np.ndarray:
        gt = g_face - 2.0 * t * ric_face
        if np.linalg.eigvalsh(gt).min() <= SPD_TOL:
            raise ValueError("time step too large: perturbed metric not positive definite")
        return boundary_normal(gt)

    frame = orthonormal_boundary_frame(g_face)
    nu = frame[..., -1, :]
    # formula components in the frame: tangential 2 Ric(e_i', nu), normal Ric(nu, nu)
    ric_frame = np.einsum("...ai,...ij,...j->...a", frame, ric_face, nu)
    formula = ric_frame.copy()
    formula[..., :-1] *= 2.0

    def residual(step: float) -> float:
        dnu = (nu_at(step) - nu_at(-step)) / (2.0 * step)
        # frame components of the coordinate derivative via the t=0 metric
        dnu_frame = np.einsum("...ij,...ai,...j->...a", g_face, frame, dnu)
        return float(np.abs((dnu_frame - formula))[trusted].max())

    res = residual(dt)
    res_coarse = residual(2.0 * dt)
    order = np.inf if res == 0.0 else float(np.log2(res_coarse / res))
    return NormalEvolutionReport(max_residual=res, residual_coarse=res_coarse,
                                 observed_order=order, dt=dt)


@dataclass(frozen=True)
class BoundaryTermReport:
    """Pointwise boundary-term formulas on the boundary face."""

    velocity_normal_derivative: np.ndarray  # -2 sum Ric_{i'nu} e_i'(u)
    ric_grad_normal: np.ndarray             # Ric(grad u, nu)
    frame_sum: np.ndarray                   # sum Ric_{i'nu} e_i'(u)
    identity_residual: float                # max |Ric(grad u, nu) - frame_sum|
    neumann_residual: float                 # max measured |du/dnu|


def boundary_term_formulas(m: MetricField, u: np.ndarray,
                           bundle: CurvatureBundle = None,
                           neumann_tol: float = 1e-8) -> BoundaryTermReport:
    """Evaluate the boundary-term identities for a function with vanishing
    normal derivative: the normal derivative of the velocity and the
    mixed-Ricci expansion of Ric(grad u, nu)."""
    n = m.patch.n
    if bundle is None:
        bundle = curvature_bundle(m)
    face = (slice(None),) * (n - 1) + (-1,)
    g_face = m.g[face]
    ric_face = bundle.ricci[face]
    trusted = bundle.trusted[face]

    du = np.stack([_diff1(u, a, m.patch.spacings[a]) for a in range(n)],
                  axis=-1)[face]
    frame = orthonormal_boundary_frame(g_face)
    nu = frame[..., -1, :]
    dnu_u = np.einsum("...i,...i->...", nu, du)
    neumann = float(np.abs(dnu_u[trusted]).max())
    if neumann > neumann_tol:
        raise ValueError(
            f"normal derivative of u is {neumann:.3e} on the boundary, "
            f"above the tolerance {neumann_tol:.1e}")

    ric_nu = np.einsum("...ij,...j->...i", ric_face, nu)       # Ric_{i nu}, covariant i
    tang_u = np.einsum("...ai,...i->...a", frame[..., :-1, :], du)  # e_i'(u)
    ric_mixed = np.einsum("...ai,...i->...a", frame[..., :-1, :], ric_nu)
    frame_sum = np.einsum("...a,...a->...", ric_mixed, tang_u)

    ginv = np.linalg.inv(g_face)
    grad_u = np.einsum("...ij,...j->...i", ginv, du)
    ric_grad = np.einsum("...ij,...i,...j->...", ric_face, grad_u, nu)

    identity = float(np.abs((ric_grad - frame_sum))[trusted].max())
    return BoundaryTermReport(
        velocity_normal_derivative=-2.0 * frame_sum,
        ric_grad_normal=ric_grad,
        frame_sum=frame_sum,
        identity_residual=identity,
        neumann_residual=neumann,
    )


def dump_csv(m: MetricField, path, bundle: CurvatureBundle = None) -> None:
    """Write nodal metric and curvature components as CSV for debugging."""
    import csv

    n = m.patch.n
    if bundle is None:
        bundle = curvature_bundle(m)
    comps = [(i, j) for i in range(n) for j in range(i, n)]
    header = (["i%d" % a for a in range(n)]
              + ["g_%d%d" % c for c in comps]
              + ["ric_%d%d" % c for c in comps]
              + ["scalar", "traceless_norm_sq", "trusted"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for idx in np.ndindex(m.patch.shape):
            row = list(idx)
            row += [repr(float(m.g[idx][c])) for c in comps]
            row += [repr(float(bundle.ricci[idx][c])) for c in comps]
            row += [repr(float(bundle.scalar[idx])),
                    repr(float(bundle.traceless_norm_sq[idx])),
                    int(bundle.trusted[idx])]
            writer.writerow(row)
