import math
import time

import numpy as np

from yamflow.cases import (
    ShrinkingCap,
    ShrinkingCylinder,
    make_cylinder,
    make_hemisphere,
)
from yamflow.flow import (
    FlowParams,
    FlowState,
    IntegratedFamily,
    advance_to,
    evolve,
    exact_solution,
    step_once,
    verify_flow_identities,
)
from yamflow.warped import boundary_data, volume, warped_curvature

t0 = time.time()

# --- shrinking cylinder tracking, N=128 -------------------------------
wm = make_cylinder(n=3, radius=1.0, length=1.0, N=128)
fam = IntegratedFamily(wm, FlowParams(cfl=0.2, t_end=0.1))
st = fam.state_at(0.1)
target = math.sqrt(0.8)
err_f = np.abs(st.metric.f - target).max()
exact = ShrinkingCylinder(3, 1.0, 1.0, 128)
err_h = np.abs(st.metric.h - exact.metric_at(0.1).h).max()
print(f"cylinder t=0.1: |f - sqrt(0.8)| = {err_f:.3e}  |h err| = {err_h:.3e}  "
      f"({time.time()-t0:.1f}s)")

# --- shrinking cap tracking, N=128 ------------------------------------
t0 = time.time()
cap = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=128)
fam_cap = IntegratedFamily(cap)
stc = fam_cap.state_at(0.05)
cap_exact = exact_solution("shrinking_cap", 0.05, n=3, radius=1.0, N=128)
rel_f = np.abs(stc.metric.f[1:] - cap_exact.f[1:]).max() / cap_exact.f.max()
rel_h = np.abs(stc.metric.h - cap_exact.h).max() / cap_exact.h.max()
H = max(abs(v) for v in boundary_data(stc.metric).mean_curvature.values())
print(f"cap t=0.05: rel f err = {rel_f:.3e}  rel h err = {rel_h:.3e}  "
      f"H = {H:.2e}  ({time.time()-t0:.1f}s)")

# --- hemisphere: Einstein, should stay round --------------------------
t0 = time.time()
hem = make_hemisphere(n=3, unit_volume=True, N=128)
traj = evolve(FlowState(hem, 0.0), FlowParams(cfl=0.2, t_end=0.02, monitor_every=200))
worstH = max(max(abs(v) for v in s.mean_curvature.values()) for s in traj.samples)
fin = traj.final.metric
curv = warped_curvature(fin)
print(f"hemisphere t=0.02: steps~{len(traj.samples)*200}, max|H| = {worstH:.2e}, "
      f"|Ric0|^2 max = {curv.tracefree_norm_sq.max():.2e}  ({time.time()-t0:.1f}s)")
# scalar should have grown per the exact law a^2 -> a^2 - 4t
a0 = hem.h[0] * 2 / math.pi
pred = 6.0 / (a0**2 - 4 * 0.02)
print(f"  scalar: got [{curv.scalar.min():.6f}, {curv.scalar.max():.6f}] "
      f"predicted {pred:.6f}")

# --- flow identities ---------------------------------------------------
t0 = time.time()
for name, family in [
    ("exact cylinder", ShrinkingCylinder(3, 1.0, 1.0, 256)),
    ("integrated perturbed", None),
]:
    if family is None:
        from yamflow.cases import make_perturbed_cylinder
        family = IntegratedFamily(make_perturbed_cylinder(N=256))
    rep = verify_flow_identities(family, 1e-4, t0=0.0)
    print(f"identities [{name}]: scalar abs={rep.scalar_abs:.3e} "
          f"rel={rep.scalar_rel:.3e}  volume abs={rep.volume_abs:.3e} "
          f"rel={rep.volume_rel:.3e}  ({time.time()-t0:.1f}s)")
    t0 = time.time()

# radius-1 hemisphere for the absolute threshold check
hem1 = make_hemisphere(n=3, radius=1.0, N=256)
rep = verify_flow_identities(IntegratedFamily(hem1), 1e-4)
print(f"identities [radius-1 hemisphere]: scalar abs={rep.scalar_abs:.3e} "
      f"rel={rep.scalar_rel:.3e}  volume abs={rep.volume_abs:.3e}")

# unit-volume hemisphere: expected to exceed 1e-3 absolute (truncation)
hemu = make_hemisphere(n=3, unit_volume=True, N=256)
rep = verify_flow_identities(IntegratedFamily(hemu), 1e-4)
print(f"identities [unit-vol hemisphere]: scalar abs={rep.scalar_abs:.3e} "
      f"rel={rep.scalar_rel:.3e}")

# --- time symmetry: one signed step back ------------------------------
wm = make_perturbed_cylinder(N=128) if False else make_cylinder(N=128)
from yamflow.cases import make_perturbed_cylinder
wm = make_perturbed_cylinder(N=128)
dt = 1e-5
fwd = step_once(wm, dt)
back = step_once(fwd, -dt)
sym_f = np.abs(back.f - wm.f).max()
sym_h = np.abs(back.h - wm.h).max()
print(f"time symmetry: f {sym_f:.2e}  h {sym_h:.2e}  (dt^5 scale ~{dt**5:.1e})")

# --- zero dt runs clean -------------------------------------------------
assert step_once(wm, 0.0) is wm
print("zero-dt no-op ok")

# --- singular stop ------------------------------------------------------
from yamflow.flow import SingularTimeError
cyl = make_cylinder(n=3, radius=0.2, length=1.0, N=64)  # singular at t=0.02
try:
    evolve(FlowState(cyl, 0.0), FlowParams(t_end=0.1, monitor_every=50))
    print("singular stop: MISSED")
except SingularTimeError as e:
    print(f"singular stop ok: '{e}' at t={e.t:.5f}, partial samples: "
          f"{len(e.partial.samples)} (theory t*=0.02)")
