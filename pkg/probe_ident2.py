from yamflow.cases import (
    ShrinkingCylinder,
    make_cylinder,
    make_hemisphere,
    make_perturbed_cylinder,
)
from yamflow.flow import IntegratedFamily, verify_flow_identities

N = 256
print("--- absolute-threshold candidates (radius-1 normalizations) ---")
for name, fam in (
    ("cylinder r=1 L=1", IntegratedFamily(make_cylinder(N=N))),
    ("cylinder exact family", ShrinkingCylinder(3, 1.0, 1.0, N)),
    ("hemisphere r=1", IntegratedFamily(make_hemisphere(N=N))),
    ("perturbed raw", IntegratedFamily(make_perturbed_cylinder(N=N, unit_volume=False))),
):
    rep = verify_flow_identities(fam, 1e-4)
    print(f"{name:24s}: scalar abs={rep.scalar_abs:.3e} rel={rep.scalar_rel:.3e}"
          f"  vol abs={rep.volume_abs:.3e} rel={rep.volume_rel:.3e}")

print("--- relative-threshold cases (unit-volume normalizations) ---")
for name, fam in (
    ("cylinder unit-vol", IntegratedFamily(make_cylinder(unit_volume=True, N=N))),
    ("hemisphere unit-vol", IntegratedFamily(make_hemisphere(unit_volume=True, N=N))),
    ("perturbed vol-norm", IntegratedFamily(make_perturbed_cylinder(N=N))),
):
    rep = verify_flow_identities(fam, 1e-4)
    print(f"{name:24s}: scalar abs={rep.scalar_abs:.3e} rel={rep.scalar_rel:.3e}"
          f"  vol abs={rep.volume_abs:.3e} rel={rep.volume_rel:.3e}")
