import numpy as np

from yamflow.flow import _rhs_arrays, cfl_timestep, exact_solution
from yamflow.stencils import apply_fd, zero_slope_boundary_value


def rhs_variant(n, domain, dr, f, h, variant):
    """Variants of the pole h-rate for spectrum comparison."""
    f_left = "odd" if domain == "cap" else "even"
    f_r = apply_fd(f, dr, 1, left=f_left, right="even")
    f_rr = apply_fd(f, dr, 2, left=f_left, right="even")
    h_r = apply_fd(h, dr, 1, left="even", right="even")
    f_s = f_r / h
    f_ss = f_rr / h**2 - f_r * h_r / h**3
    f_safe = f.copy()
    f_safe[0] = 1.0
    f_rate = f_ss + (n - 2) * (f_s**2 - 1.0) / f_safe
    q = f_ss / f_safe
    if variant == "extrap":
        q[0] = q[1]
        q[0] = zero_slope_boundary_value(q, "left")
    else:  # d3 formula
        f_rrr0 = apply_fd(f, dr, 3, left="odd", right="even")[0]
        h_rr0 = apply_fd(h, dr, 2, left="even", right="even")[0]
        q[0] = ((f_rrr0 - f_r[0] * h_rr0 / h[0]) / h[0] ** 3) / (f_r[0] / h[0])
    h_rate = (n - 1) * q * h
    f_rate[0] = 0.0
    return f_rate, h_rate


def assemble_jacobian(wm, variant, slave_h0):
    n, domain, dr = wm.n, wm.domain, wm.dr
    nodes = wm.f.size
    x0 = np.concatenate([wm.f, wm.h])

    def F(x):
        f, h = x[:nodes].copy(), x[nodes:].copy()
        if slave_h0:
            h[0] = apply_fd(f, dr, 1, left="odd", right="even")[0]
        rf, rh = rhs_variant(n, domain, dr, f, h, variant)
        if slave_h0:
            rh[0] = 0.0  # h[0] is not a dynamical variable in this mode
        return np.concatenate([rf, rh])

    base = F(x0)
    J = np.empty((2 * nodes, 2 * nodes))
    for k in range(2 * nodes):
        eps = 1e-7 * max(1.0, abs(x0[k]))
        xk = x0.copy()
        xk[k] += eps
        J[:, k] = (F(xk) - base) / eps
    return J


N = 64
wm = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
dt = cfl_timestep(wm, 0.2)
for variant in ("d3", "extrap"):
    for slave in (False, True):
        J = assemble_jacobian(wm, variant, slave)
        ev = np.linalg.eigvals(J)
        worst = ev[np.argmax(ev.real)]
        big = ev[np.argmax(np.abs(ev))]
        print(f"variant={variant:7s} slave_h0={slave}: "
              f"max Re(lam) = {worst.real:+.4e} (lam={worst:.3e})  "
              f"max |lam| dt = {np.abs(big) * dt:.3f}  "
              f"count Re>1 = {(ev.real > 1.0).sum()}")
