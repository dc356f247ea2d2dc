import numpy as np

from yamflow.cases import make_perturbed_cylinder
from yamflow.flow import IntegratedFamily, verify_flow_identities
from yamflow.warped import radial_laplacian, warped_curvature

# residual field structure at N=256, scaled dt
for N in (128, 256, 512):
    wm = make_perturbed_cylinder(N=N)
    fam = IntegratedFamily(wm)
    rep = verify_flow_identities(fam, 1e-4)
    print(f"N={N}: scalar abs={rep.scalar_abs:.3e} rel={rep.scalar_rel:.3e} "
          f"vol abs={rep.volume_abs:.3e}")

# field shape: smooth or sawtooth?
N = 256
wm = make_perturbed_cylinder(N=N)
fam = IntegratedFamily(wm)
dt = 1.98e-6
ts = [0.0, dt / 2, dt, 3 * dt / 2, 2 * dt]
ms = [fam.metric_at(t) for t in ts]
scal = [warped_curvature(m).scalar for m in ms]
wide = (scal[4] - scal[0]) / (2 * dt)
narrow = (scal[3] - scal[1]) / dt
lhs = (4 * narrow - wide) / 3
piv = ms[2]
curv = warped_curvature(piv)
lap = radial_laplacian(piv, curv.scalar, curv).laplacian
rhs = lap + 2 * (curv.lambda_radial**2 + 2 * curv.lambda_sphere**2)
resid = lhs - rhs
print("\nresidual field: first 8:", [f"{v:.2e}" for v in resid[:8]])
j = int(np.argmax(np.abs(resid)))
print(f"argmax at node {j}/{N}; neighborhood:",
      [f"{v:.2e}" for v in resid[max(0, j - 3):j + 4]])
# smooth part vs sawtooth part
saw = resid[1:-1] - 0.5 * (resid[:-2] + resid[2:])
print(f"sawtooth amplitude: {np.abs(saw).max():.2e}  "
      f"smooth max: {np.abs(resid).max():.2e}")
# which side is noisy? FD of scalars vs laplacian
saw_lhs = lhs[1:-1] - 0.5 * (lhs[:-2] + lhs[2:])
saw_rhs = rhs[1:-1] - 0.5 * (rhs[:-2] + rhs[2:])
print(f"lhs sawtooth: {np.abs(saw_lhs).max():.2e}   "
      f"rhs sawtooth: {np.abs(saw_rhs).max():.2e}")
# R-field sawtooth at pivot
saw_R = curv.scalar[1:-1] - 0.5 * (curv.scalar[:-2] + curv.scalar[2:])
print(f"scalar-field sawtooth at pivot: {np.abs(saw_R).max():.2e}")
base = warped_curvature(wm).scalar
saw_R0 = base[1:-1] - 0.5 * (base[:-2] + base[2:])
print(f"scalar-field sawtooth at t=0:   {np.abs(saw_R0).max():.2e}")
