import numpy as np

from probe_spectrum import assemble_jacobian
from yamflow.flow import cfl_timestep, exact_solution

for N in (32, 64, 128):
    wm = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
    dt = cfl_timestep(wm, 0.2)
    J = assemble_jacobian(wm, "d3", False)
    ev, V = np.linalg.eig(J)
    idx = np.argsort(-ev.real)
    nodes = wm.f.size
    print(f"N={N}: dt={dt:.2e}  top Re(lam): "
          + " ".join(f"{ev[i].real:+.3e}" for i in idx[:4]))
    for i in idx[:3]:
        v = np.abs(V[:, i])
        fpart, hpart = v[:nodes], v[nodes:]
        jf = int(np.argmax(fpart))
        jh = int(np.argmax(hpart))
        # localization: fraction of mass in first/last 6 nodes
        mass = v.sum()
        pole = (fpart[:6].sum() + hpart[:6].sum()) / mass
        edge = (fpart[-6:].sum() + hpart[-6:].sum()) / mass
        print(f"   lam={ev[i]:.3e}: argmax f={jf} h={jh}  "
              f"pole mass={pole:.2f} edge mass={edge:.2f}  "
              f"|f|max={fpart.max():.2f} |h|max={hpart.max():.2f}")
