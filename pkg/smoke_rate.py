import time

import numpy as np

from yamflow.cases import (
    ShrinkingCylinder,
    make_cylinder,
    make_hemisphere,
    make_perturbed_cylinder,
)
from yamflow.flow import IntegratedFamily
from yamflow.rate_checks import (
    evolution_rate_terms,
    monotonicity_check,
    rate_finite_difference,
    verify_first_variation,
    verify_rate_formula,
    yamabe_initial_rate,
)

t0 = time.time()

# --- closed-form anchors: unit-volume cylinder --------------------------
wm = make_cylinder(unit_volume=True, N=256)
rate = yamabe_initial_rate(wm)
print(f"yamabe_initial_rate(cylinder) = {rate!r}  (target 4/3 = {4/3!r})")

u = np.ones_like(wm.f)
for p, want in ((2.0, 8.0 / 3.0), (3.0, 2.0), (5.0, 4.0 / 3.0)):
    terms = evolution_rate_terms(wm, u, p)
    tot = sum(terms.values())
    print(f"p={p}: terms = {[f'{terms[k]:.12f}' for k in ('ric0_terms', 'coefficient_line', 'laplacian_line', 'boundary_line')]} total={tot:.12f} want={want:.12f}")

# coefficient_line EXACTLY 0 at critical?
t5 = evolution_rate_terms(wm, u, 5.0)
print(f"critical coefficient_line is exactly 0.0: {t5['coefficient_line'] == 0.0}")

# --- exact family FD: cylinder p in {2,3,5} -----------------------------
fam = ShrinkingCylinder(3, 1.0, 1.0 / (4 * np.pi), 256)
for p, want in ((2.0, 8.0 / 3.0), (3.0, 2.0), (5.0, 4.0 / 3.0)):
    fd = rate_finite_difference(fam, p)
    print(f"exact-family FD p={p}: {fd.value:.10f} want {want:.10f} "
          f"rel={abs(fd.value-want)/want:.2e} trusted={fd.trusted} pivot={fd.t_pivot}")

# --- verify_rate_formula on integrated families --------------------------
print(f"\n[{time.time()-t0:.1f}s] integrated families:")
t0 = time.time()
fam = IntegratedFamily(make_cylinder(unit_volume=True, N=128))
for p in (2.0, 5.0):
    rep = verify_rate_formula(fam, p)
    print(f"cylinder(int) p={p}: fd={rep.rate_fd:.8f} rhs={rep.rhs_total:.8f} "
          f"rel={rep.rel_error:.2e} trusted={rep.trusted}")

fam = IntegratedFamily(make_perturbed_cylinder(N=128))
for p in (2.0, 5.0):
    rep = verify_rate_formula(fam, p)
    print(f"perturbed p={p}: fd={rep.rate_fd:.8f} rhs={rep.rhs_total:.8f} "
          f"rel={rep.rel_error:.2e} trusted={rep.trusted} "
          f"terms={ {k: round(v, 6) for k, v in rep.rhs_terms.items()} }")

fam = IntegratedFamily(make_hemisphere(unit_volume=True, N=128))
rep = verify_rate_formula(fam, 5.0)
print(f"hemisphere p=5: fd={rep.rate_fd:.3e} rhs={rep.rhs_total:.3e} "
      f"(both ~0; Einstein)")

# --- first variation ------------------------------------------------------
print(f"\n[{time.time()-t0:.1f}s] first variation:")
t0 = time.time()
fam = IntegratedFamily(make_cylinder(unit_volume=True, N=128))
fv = verify_first_variation(fam, 2.0)
print(f"cylinder p=2: fd={fv.rate_fd:.8f} formula={fv.rate_formula:.8f} "
      f"rel={fv.residual_rel:.2e} constraint rel={fv.constraint_rel:.2e}")
fam = IntegratedFamily(make_perturbed_cylinder(N=128))
for dt in (4e-4, 2e-4, 1e-4):
    fv = verify_first_variation(fam, 2.0, dt=dt)
    print(f"perturbed p=2 dt={dt:.0e}: rel={fv.residual_rel:.3e} "
          f"abs={fv.residual_abs:.3e} constraint={fv.constraint_rel:.3e}")

# --- monotonicity ----------------------------------------------------------
print(f"\n[{time.time()-t0:.1f}s] monotonicity:")
t0 = time.time()
rep = monotonicity_check(make_hemisphere(unit_volume=True, N=96), 0.02, samples=4)
print(f"hemisphere: einstein={rep.einstein} non_dec={rep.non_decreasing} "
      f"eq_consistent={rep.equality_consistent} min_rate={rep.min_rate:.2e} "
      f"Y drift={max(abs(v-rep.values[0]) for v in rep.values):.2e}")
rep = monotonicity_check(make_cylinder(unit_volume=True, N=96), 0.02, samples=4)
print(f"cylinder: einstein={rep.einstein} non_dec={rep.non_decreasing} "
      f"eq_consistent={rep.equality_consistent} min_rate={rep.min_rate:.4f}")
print(f"[{time.time()-t0:.1f}s] done")
