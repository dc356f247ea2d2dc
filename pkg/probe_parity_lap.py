import numpy as np

from yamflow.cases import make_perturbed_cylinder, make_hemisphere, make_cylinder
from yamflow.flow import IntegratedFamily
from yamflow.stencils import apply_fd
from yamflow.warped import warped_curvature, volume, integrate_radial


def parity_laplacian(wm, u, curv):
    """Laplacian with even-ghost closure (flow-class fields only)."""
    dr = wm.dr
    u_r = apply_fd(u, dr, 1, left="even", right="even")
    u_rr = apply_fd(u, dr, 2, left="even", right="even")
    h_r = apply_fd(wm.h, dr, 1, left="even", right="even")
    u_s = u_r / wm.h
    u_ss = u_rr / wm.h**2 - u_r * h_r / wm.h**3
    lap = u_ss + (wm.n - 1) * curv.f_s / np.where(wm.f > 0, wm.f, 1.0) * u_s
    if wm.domain == "cap":
        lap[0] = wm.n * u_rr[0] / wm.h[0] ** 2
    return lap


def check(name, fam, dt_eff):
    ts = [dt_eff * k for k in (0.0, 0.5, 1.0, 1.5, 2.0)]
    ms = [fam.metric_at(t) for t in ts]
    scal = [warped_curvature(m).scalar for m in ms]
    wide = (scal[4] - scal[0]) / (2 * dt_eff)
    narrow = (scal[3] - scal[1]) / dt_eff
    lhs = (4 * narrow - wide) / 3
    piv = ms[2]
    curv = warped_curvature(piv)
    lap = parity_laplacian(piv, curv.scalar, curv)
    n = piv.n
    rhs = lap + 2 * (curv.lambda_radial**2 + (n - 1) * curv.lambda_sphere**2)
    resid = np.abs(lhs - rhs)
    print(f"{name}: abs={resid.max():.3e} rel={resid.max()/np.abs(rhs).max():.3e} "
          f"edge0={resid[0]:.2e} edgeN={resid[-1]:.2e} "
          f"interior={resid[3:-3].max():.2e}")


for N in (128, 256, 512):
    wm = make_perturbed_cylinder(N=N)
    scale = np.abs(warped_curvature(wm).scalar).max()
    check(f"perturbed N={N}", IntegratedFamily(wm), 1e-4 / scale)

wm = make_hemisphere(N=256)
check("hemisphere(r=1) N=256", IntegratedFamily(wm), 1e-4 / 6.0)

wm = make_cylinder(unit_volume=True, N=256)
check("cylinder(unitvol) N=256", IntegratedFamily(wm), 1e-4 / 2.0)
