import numpy as np

from yamflow.flow import cfl_timestep, exact_solution
from yamflow.stencils import apply_fd, fd_weights, zero_slope_boundary_value


def rhs(n, dr, f, h, form):
    """Cap-domain RHS variants distinguished by how f_ss is assembled."""
    f_r = apply_fd(f, dr, 1, left="odd", right="even")
    f_s = f_r / h
    if form == "direct":
        f_rr = apply_fd(f, dr, 2, left="odd", right="even")
        h_r = apply_fd(h, dr, 1, left="even", right="even")
        f_ss = f_rr / h**2 - f_r * h_r / h**3
    else:  # nested: f_ss = d_r(f_s)/h, f_s is even across the pole
        f_ss = apply_fd(f_s, dr, 1, left="even", right="even") / h
    f_safe = f.copy()
    f_safe[0] = 1.0
    f_rate = f_ss + (n - 2) * (f_s**2 - 1.0) / f_safe
    q = f_ss / f_safe
    q[0] = q[1]
    q[0] = zero_slope_boundary_value(q, "left")
    f_rate[0] = 0.0
    h_rate = (n - 1) * q * h
    return f_rate, h_rate


def make_filter(width):
    """Least-squares projection of nodes 0..width-1 onto even quartics in r.

    Values at nodes >= width pass through; returns the (width x sample) map
    applied to the first `sample` nodes.
    """
    sample = width + 4
    j = np.arange(sample, dtype=float)
    basis = np.stack([np.ones_like(j), j**2, j**4], axis=1)
    proj = basis @ np.linalg.pinv(basis)  # maps samples -> fitted values
    return proj[:width], sample


def step_map(n, dr, f0, h0, dt, form, filt):
    f, h = f0, h0
    kf1, kh1 = rhs(n, dr, f, h, form)
    kf2, kh2 = rhs(n, dr, f + 0.5 * dt * kf1, h + 0.5 * dt * kh1, form)
    kf3, kh3 = rhs(n, dr, f + 0.5 * dt * kf2, h + 0.5 * dt * kh2, form)
    kf4, kh4 = rhs(n, dr, f + dt * kf3, h + dt * kh3, form)
    f1 = f + (dt / 6) * (kf1 + 2 * kf2 + 2 * kf3 + kf4)
    h1 = h + (dt / 6) * (kh1 + 2 * kh2 + 2 * kh3 + kh4)
    f1[0] = 0.0
    f1[-1] = zero_slope_boundary_value(f1, "right")
    if filt:
        proj, sample = make_filter(6)
        h1[:6] = proj @ h1[:sample]
    h1[0] = apply_fd(f1, dr, 1, left="odd", right="even")[0]
    return f1, h1


N = 64
wm = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
dt = cfl_timestep(wm, 0.2)
nodes = wm.f.size
x0 = np.concatenate([wm.f, wm.h])

for form in ("direct", "nested"):
    for filt in (False, True):
        def Phi(x):
            f1, h1 = step_map(3, wm.dr, x[:nodes].copy(), x[nodes:].copy(),
                              dt, form, filt)
            return np.concatenate([f1, h1])

        base = Phi(x0)
        J = np.empty((2 * nodes, 2 * nodes))
        for k in range(2 * nodes):
            eps = 1e-7 * max(1.0, abs(x0[k]))
            xk = x0.copy()
            xk[k] += eps
            J[:, k] = (Phi(xk) - base) / eps
        mu = np.linalg.eigvals(J)
        rad = np.abs(mu).max()
        grow = (np.abs(mu) > 1.0 + 50 * dt).sum()
        print(f"form={form:6s} filter={filt}: spectral radius = {rad:.6f}  "
              f"modes above 1+50dt: {grow}  (1+50dt = {1 + 50 * dt:.4f})")
