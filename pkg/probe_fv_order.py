import time

import numpy as np

from yamflow.cases import make_cylinder, make_perturbed_cylinder, ShrinkingCylinder
from yamflow.flow import IntegratedFamily
from yamflow.rate_checks import verify_first_variation
from yamflow.stencils import orders_from_sequence


def triplet(family, p, dts, t0):
    reports = [verify_first_variation(family, p, dt=dt, t0=t0, scale_dt=False)
               for dt in dts]
    signed = [r.rate_fd - r.rate_formula for r in reports]
    diffs = [abs(signed[i] - signed[i + 1]) for i in range(len(signed) - 1)]
    orders = [np.log2(diffs[i] / diffs[i + 1]) for i in range(len(diffs) - 1)]
    return reports, signed, diffs, orders


t_start = time.time()

for label, family, N in [
    ("cylinder closed form", ShrinkingCylinder(n=3, radius=1.0, length=1.0, N=128), 128),
    ("cylinder integrated N=64", IntegratedFamily(make_cylinder(n=3, N=64, unit_volume=True)), 64),
    ("perturbed N=64", IntegratedFamily(make_perturbed_cylinder(n=3, N=64)), 64),
    ("perturbed N=128", IntegratedFamily(make_perturbed_cylinder(n=3, N=128)), 128),
]:
    dts = [4e-4, 2e-4, 1e-4, 5e-5]
    t0 = dts[0]
    reports, signed, diffs, orders = triplet(family, 2.0, dts, t0)
    print(f"{label}:")
    for r, s in zip(reports, signed):
        print(f"  dt={r.dt:.1e} pivot={r.t_pivot:.2e} fd={r.rate_fd:.10f} "
              f"formula={r.rate_formula:.10f} signed={s:+.3e} "
              f"rel={r.residual_rel:.3e} constraint={r.constraint_rel:.3e}")
    print(f"  diffs = {['%.3e' % d for d in diffs]}")
    print(f"  orders = {['%.3f' % o for o in orders]}")
    print(f"  [{time.time()-t_start:.1f}s]")
