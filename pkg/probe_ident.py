from yamflow.cases import make_cylinder, make_hemisphere, make_perturbed_cylinder
from yamflow.flow import IntegratedFamily, verify_flow_identities

N = 256
cases = {
    "cylinder(unitvol)": make_cylinder(unit_volume=True, N=N),
    "hemisphere(r=1)": make_hemisphere(N=N),
    "hemisphere(unitvol)": make_hemisphere(unit_volume=True, N=N),
    "perturbed(volnorm)": make_perturbed_cylinder(N=N),
}
for name, wm in cases.items():
    fam = IntegratedFamily(wm)
    for label, kw in (
        ("raw", dict(scale_dt=False, richardson=False)),
        ("scaled", dict(scale_dt=True, richardson=False)),
        ("scaled+rich", dict(scale_dt=True, richardson=True)),
    ):
        rep = verify_flow_identities(fam, 1e-4, **kw)
        print(f"{name:20s} {label:12s} (dt_eff={rep.dt:.2e}): "
              f"scalar abs={rep.scalar_abs:.3e} rel={rep.scalar_rel:.3e}  "
              f"vol abs={rep.volume_abs:.3e} rel={rep.volume_rel:.3e}")
    print()
