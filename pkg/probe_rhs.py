import math

import numpy as np

from yamflow.flow import flow_rhs, exact_solution

n = 3
for N in (64, 128):
    cap = exact_solution("shrinking_cap", 0.0, n=n, radius=1.0, N=N)
    a = 1.0
    a_dot = -(n - 1) / a
    r = cap.r
    f_rate_exact = a_dot * np.sin(math.pi * r / 2.0)
    h_rate_exact = np.full_like(r, a_dot * math.pi / 2.0)
    rates = flow_rhs(cap)
    ef = rates.f_rate - f_rate_exact
    eh = rates.h_rate - h_rate_exact
    print(f"N={N}: f_rate err nodes 0..5: {[f'{v:.2e}' for v in ef[:6]]}")
    print(f"       f_rate err interior max: {np.abs(ef[6:]).max():.2e} "
          f"at j={int(np.argmax(np.abs(ef)))}")
    print(f"       h_rate err nodes 0..5: {[f'{v:.2e}' for v in eh[:6]]}")
    print(f"       h_rate err interior max: {np.abs(eh[6:]).max():.2e} "
          f"at j={int(np.argmax(np.abs(eh)))}")
