import numpy as np

from yamflow.flow import cfl_timestep, exact_solution
from yamflow.stencils import apply_fd, zero_slope_boundary_value


def rhs(n, dr, f, h, domain):
    """Nested-form RHS: f_ss = d_r(f_s)/h, no h-derivatives anywhere."""
    f_left = "odd" if domain == "cap" else "even"
    f_r = apply_fd(f, dr, 1, left=f_left, right="even")
    f_s = f_r / h
    s_left = "even" if domain == "cap" else "odd"
    f_ss = apply_fd(f_s, dr, 1, left=s_left, right="odd") / h
    f_safe = f.copy()
    if domain == "cap":
        f_safe[0] = 1.0
    f_rate = f_ss + (n - 2) * (f_s**2 - 1.0) / f_safe
    q = f_ss / f_safe
    if domain == "cap":
        q[0] = q[1]
        q[0] = zero_slope_boundary_value(q, "left")
        f_rate[0] = 0.0
    h_rate = (n - 1) * q * h
    return f_rate, h_rate


def make_filter(width):
    sample = width + 4
    j = np.arange(sample, dtype=float)
    basis = np.stack([np.ones_like(j), j**2, j**4], axis=1)
    proj = basis @ np.linalg.pinv(basis)
    return proj[:width], sample


def step_map(n, dr, f0, h0, dt, filt, domain="cap"):
    f, h = f0, h0
    kf1, kh1 = rhs(n, dr, f, h, domain)
    kf2, kh2 = rhs(n, dr, f + 0.5 * dt * kf1, h + 0.5 * dt * kh1, domain)
    kf3, kh3 = rhs(n, dr, f + 0.5 * dt * kf2, h + 0.5 * dt * kh2, domain)
    kf4, kh4 = rhs(n, dr, f + dt * kf3, h + dt * kh3, domain)
    f1 = f + (dt / 6) * (kf1 + 2 * kf2 + 2 * kf3 + kf4)
    h1 = h + (dt / 6) * (kh1 + 2 * kh2 + 2 * kh3 + kh4)
    if domain == "cap":
        f1[0] = 0.0
    else:
        f1[0] = zero_slope_boundary_value(f1, "left")
    f1[-1] = zero_slope_boundary_value(f1, "right")
    if filt and domain == "cap":
        proj, sample = make_filter(6)
        h1[:6] = proj @ h1[:sample]
    if domain == "cap":
        h1[0] = apply_fd(f1, dr, 1, left="odd", right="even")[0]
    return f1, h1


for N in (64, 128):
    wm = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
    dt = cfl_timestep(wm, 0.2)
    nodes = wm.f.size
    x0 = np.concatenate([wm.f, wm.h])
    for filt in (False, True):
        def Phi(x):
            f1, h1 = step_map(3, wm.dr, x[:nodes].copy(), x[nodes:].copy(),
                              dt, filt)
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
        print(f"N={N} filter={filt}: spectral radius = {rad:.6f}  "
              f"spurious: {grow}")

# accuracy of the nested RHS on exact data
import math
for N in (64, 128):
    cap = exact_solution("shrinking_cap", 0.0, n=3, radius=1.0, N=N)
    a_dot = -2.0
    f_rate_exact = a_dot * np.sin(math.pi * cap.r / 2.0)
    h_rate_exact = np.full_like(cap.r, a_dot * math.pi / 2.0)
    rf, rh = rhs(3, cap.dr, cap.f, cap.h, "cap")
    print(f"N={N} nested rhs err: f {np.abs(rf - f_rate_exact).max():.2e} "
          f"(edge {np.abs(rf - f_rate_exact)[-3:].max():.2e})  "
          f"h {np.abs(rh - h_rate_exact).max():.2e}")

# tube: perturbed-profile spectrum sanity
from yamflow.cases import make_perturbed_cylinder
wm = make_perturbed_cylinder(N=64)
dt = cfl_timestep(wm, 0.2)
nodes = wm.f.size
x0 = np.concatenate([wm.f, wm.h])

def Phi(x):
    f1, h1 = step_map(3, wm.dr, x[:nodes].copy(), x[nodes:].copy(), dt,
                      False, "tube")
    return np.concatenate([f1, h1])

base = Phi(x0)
J = np.empty((2 * nodes, 2 * nodes))
for k in range(2 * nodes):
    eps = 1e-7 * max(1.0, abs(x0[k]))
    xk = x0.copy()
    xk[k] += eps
    J[:, k] = (Phi(xk) - base) / eps
mu = np.linalg.eigvals(J)
print(f"tube perturbed N=64: spectral radius = {np.abs(mu).max():.6f}")
