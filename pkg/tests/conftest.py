"""Shared strategies and helpers for the test suite.

Strategy metrics satisfy the zero-mean-curvature boundary condition in
the analytic sense: tube profiles are cosine series in r, so every odd
r-derivative vanishes at both ends, and cap profiles modulate the round
hemisphere by even cosine series that are flat at both ends.  Amplitudes
are kept small enough that measured mean curvatures stay well inside the
class tolerance at the grid sizes drawn.
"""

from __future__ import annotations

import math

import numpy as np
from hypothesis import strategies as st

from yamflow.warped import WarpedMetric

# bounded coefficient magnitudes keep profiles positive: the k-th cosine
# is weighted 1/k^2, and 0.3 * sum(1/k^2, k=1..3) < 0.41
_TUBE_RIPPLE = 0.3
_LAPSE_RIPPLE = 0.2
_CAP_RIPPLE = 0.12


def cosine_profile(r: np.ndarray, base: float, coeffs, ripple: float) -> np.ndarray:
    out = np.full_like(r, base)
    for k, a in enumerate(coeffs, start=1):
        out = out + base * ripple * (a / k**2) * np.cos(k * math.pi * r)
    return out


coefficient_lists = st.lists(
    st.floats(-1.0, 1.0, allow_nan=False), min_size=0, max_size=3
)


@st.composite
def tube_metrics(draw, n_values=(3, 4, 5), N_values=(48, 64, 96)):
    """Tubes with exactly minimal boundary spheres and smooth profiles."""
    n = draw(st.sampled_from(n_values))
    N = draw(st.sampled_from(N_values))
    c0 = draw(st.floats(0.5, 2.0))
    d0 = draw(st.floats(0.5, 2.0))
    f_coeffs = draw(coefficient_lists)
    h_coeffs = draw(coefficient_lists)
    r = np.linspace(0.0, 1.0, N + 1)
    f = cosine_profile(r, c0, f_coeffs, _TUBE_RIPPLE)
    h = cosine_profile(r, d0, h_coeffs, _LAPSE_RIPPLE)
    return WarpedMetric(n, "tube", h, f)


@st.composite
def cap_metrics(draw, n_values=(3, 4), N_values=(64, 96)):
    """Caps: round hemispheres modulated by a gentle even cosine series.

    f and h share the modulation, so the pole ratio f_r(0)/h(0) equals 1
    analytically; the constructor tolerance absorbs the measurement
    truncation of the richer profile.
    """
    n = draw(st.sampled_from(n_values))
    N = draw(st.sampled_from(N_values))
    a = draw(st.floats(0.6, 1.8))
    coeffs = draw(st.lists(st.floats(-1.0, 1.0), min_size=0, max_size=2))
    r = np.linspace(0.0, 1.0, N + 1)
    mod = cosine_profile(r, 1.0, coeffs, _CAP_RIPPLE)
    f = a * np.sin(0.5 * math.pi * r) * mod
    f[0] = 0.0
    h = a * 0.5 * math.pi * mod
    return WarpedMetric(n, "cap", h, f, pole_tol=1e-6)


@st.composite
def warped_metrics(draw):
    """Either domain, for properties shared by tubes and caps."""
    if draw(st.booleans()):
        return draw(tube_metrics())
    return draw(cap_metrics())
