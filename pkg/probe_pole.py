import numpy as np

import yamflow.flow as fl
from yamflow.flow import FlowParams, FlowState, IntegratedFamily, exact_solution
from yamflow.stencils import apply_fd

fl._FLOW_POLE_TOL = 1e-2  # let it run so we can watch the drift

for N in (64, 128, 256):
    cap = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
    fam = IntegratedFamily(cap)
    drifts = []
    errs = []
    for t in (0.0125, 0.025, 0.0375, 0.05):
        st = fam.state_at(t)
        m = st.metric
        ratio = apply_fd(m.f, m.dr, 1, left="odd", right="even")[0] / m.h[0]
        ex = exact_solution("shrinking_cap", t, n=3, radius=1.0, N=N)
        rel_f = np.abs(m.f - ex.f).max() / ex.f.max()
        rel_h = np.abs(m.h - ex.h).max() / ex.h.max()
        # where is the f error largest?
        j = int(np.argmax(np.abs(m.f - ex.f)))
        drifts.append(ratio - 1.0)
        errs.append((rel_f, rel_h, j))
    print(f"N={N}: ratio-1 at t=.0125..0.05: "
          + " ".join(f"{d:+.2e}" for d in drifts))
    print(f"       rel_f, rel_h, argmax_f: "
          + " ".join(f"({a:.1e},{b:.1e},j={j})" for a, b, j in errs))
    # h error profile at final time
    st = fam.state_at(0.05)
    ex = exact_solution("shrinking_cap", 0.05, n=3, radius=1.0, N=N)
    dh = st.metric.h - ex.h
    df = st.metric.f - ex.f
    print(f"       h err nodes 0..4: {[f'{v:.1e}' for v in dh[:5]]}  "
          f"interior max {np.abs(dh[5:]).max():.1e}")
    print(f"       f err nodes 0..4: {[f'{v:.1e}' for v in df[:5]]}  "
          f"interior max {np.abs(df[5:]).max():.1e}")
