import numpy as np

import yamflow.flow as fl
from yamflow.flow import cfl_timestep, exact_solution, step_once
from yamflow.stencils import apply_fd

fl._FLOW_POLE_TOL = 1.0  # disable rejection; we want to watch raw dynamics

N = 64
wm = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
dt = cfl_timestep(wm, 0.2)
print(f"dt = {dt:.3e}")
for k in range(40):
    wm = step_once(wm, dt)
    if k % 4 == 0 or k > 32:
        fr0 = apply_fd(wm.f, wm.dr, 1, left="odd", right="even")[0]
        f_rr = apply_fd(wm.f, wm.dr, 2, left="odd", right="even")
        h_r = apply_fd(wm.h, wm.dr, 1, left="even", right="even")
        f_r = apply_fd(wm.f, wm.dr, 1, left="odd", right="even")
        f_ss = f_rr / wm.h**2 - f_r * h_r / wm.h**3
        q = f_ss[1:4] / wm.f[1:4]
        print(f"k={k:3d} h[0:4]={[f'{v:.8f}' for v in wm.h[:4]]} "
              f"ratio-1={fr0/wm.h[0]-1:+.2e} q123={[f'{v:.5f}' for v in q]}")
