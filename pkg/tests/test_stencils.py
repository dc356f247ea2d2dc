"""Finite-difference stencil unit tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamflow.stencils import (
    apply_fd,
    edge_derivative,
    fd_weights,
    observed_orders,
    orders_from_sequence,
    zero_slope_boundary_value,
)


def test_fd_weights_exact_on_polynomials():
    # a stencil over m nodes reproduces derivatives of degree < m exactly
    offs = (-3, -2, -1, 0, 1, 2, 3)
    for deriv in (1, 2):
        w = fd_weights(offs, deriv)
        for degree in range(len(offs)):
            x = np.array(offs, dtype=float)
            val = w @ x**degree
            exact = (
                math.factorial(degree) / math.factorial(degree - deriv)
                if degree >= deriv else 0.0
            ) * (0.0 ** max(degree - deriv, 0) if degree != deriv else 1.0)
            assert val == pytest.approx(exact, abs=1e-8)


def test_fd_weights_zeroth_moment_tiny():
    for offs in [(0, 1, 2, 3, 4, 5, 6), (-3, -2, -1, 0, 1, 2, 3),
                 tuple(range(-10, 1))]:
        for deriv in (1, 2):
            w = fd_weights(offs, deriv)
            assert abs(w.sum()) < 1e-13 * np.abs(w).max()


def test_apply_fd_annihilates_constants_exactly():
    # anchor subtraction makes constants map to exact zeros at every node,
    # independent of summation order in the weight row
    y = np.full(33, 7.25)
    for left, right in [("onesided", "onesided"), ("even", "even"),
                        ("odd", "onesided")]:
        d = apply_fd(y, 1.0 / 32, 1, left=left, right=right)
        assert np.all(d == 0.0)


def test_fd_weights_rejects_short_stencils():
    with pytest.raises(ValueError):
        fd_weights((0, 1), 2)


def test_apply_fd_interior_accuracy():
    N = 64
    r = np.linspace(0.0, 1.0, N + 1)
    y = np.sin(2.0 * np.pi * r)
    d1 = apply_fd(y, 1.0 / N, 1)
    exact = 2.0 * np.pi * np.cos(2.0 * np.pi * r)
    interior = slice(4, -4)
    assert np.abs(d1 - exact)[interior].max() < 1e-7


def test_apply_fd_even_closure_kills_edge_slope():
    # cosine data extends evenly; the edge rows of a reflected
    # antisymmetric stencil cancel symmetric data down to roundoff
    N = 32
    r = np.linspace(0.0, 1.0, N + 1)
    y = 1.0 + 0.5 * np.cos(3.0 * np.pi * r)
    d1 = apply_fd(y, 1.0 / N, 1, left="even", right="even")
    assert abs(d1[0]) < 1e-13
    assert abs(d1[-1]) < 1e-13


def test_apply_fd_odd_closure_matches_odd_function():
    N = 64
    r = np.linspace(0.0, 1.0, N + 1)
    y = np.sin(0.5 * np.pi * r)
    d1 = apply_fd(y, 1.0 / N, 1, left="odd")
    exact = 0.5 * np.pi * np.cos(0.5 * np.pi * r)
    assert abs(d1[0] - exact[0]) < 1e-9


def test_apply_fd_rejects_coarse_grids():
    with pytest.raises(ValueError):
        apply_fd(np.ones(5), 0.25, 1)


def test_edge_derivative_polynomial_exactness():
    # width w is exact through degree w-1
    N = 32
    dr = 1.0 / N
    r = np.linspace(0.0, 1.0, N + 1)
    for width in (7, 11):
        y = (1.0 + r) ** (width - 1)
        left = edge_derivative(y, dr, "left", width=width)
        right = edge_derivative(y, dr, "right", width=width)
        assert left == pytest.approx(width - 1, rel=1e-9)
        assert right == pytest.approx((width - 1) * 2.0 ** (width - 2), rel=1e-9)


def test_edge_derivative_width_clamps_to_array():
    y = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    assert edge_derivative(y, 1.0, "left", width=11) == pytest.approx(1.0)


def test_edge_derivative_truncation_shrinks_with_width():
    # on an even profile the true edge slope is zero; wider one-sided
    # stencils report strictly less of their own truncation
    N = 64
    r = np.linspace(0.0, 1.0, N + 1)
    y = 1.0 + 0.1 * np.cos(2.0 * np.pi * r)
    e7 = abs(edge_derivative(y, 1.0 / N, "left", width=7))
    e11 = abs(edge_derivative(y, 1.0 / N, "left", width=11))
    assert e11 < 1e-3 * e7
    assert e11 < 1e-10


def test_zero_slope_boundary_value_closes_the_loop():
    rng = np.random.default_rng(7)
    y = 1.0 + 0.1 * rng.standard_normal(33)
    for side in ("left", "right"):
        z = y.copy()
        j = 0 if side == "left" else -1
        z[j] = zero_slope_boundary_value(z, side, width=11)
        assert abs(edge_derivative(z, 1.0 / 32, side, width=11)) < 1e-10


def test_zero_slope_boundary_value_clamps_width():
    y = np.array([5.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    v = zero_slope_boundary_value(y, "left", width=11)
    assert np.isfinite(v)


def test_observed_orders():
    errs = [1.0, 0.25, 0.0625]
    assert observed_orders(errs) == pytest.approx([2.0, 2.0])
    assert observed_orders([1.0, 0.0])[0] == np.inf


def test_orders_from_sequence():
    # values converging like 4^-k have first-difference order 2
    values = [1.0 + 4.0**-k for k in range(4)]
    orders = orders_from_sequence(values)
    assert orders == pytest.approx([2.0, 2.0], abs=1e-9)


@given(st.integers(1, 3), st.floats(0.3, 3.0))
@settings(max_examples=20, deadline=None)
def test_even_closure_annihilates_any_cosine(k, amp):
    N = 48
    r = np.linspace(0.0, 1.0, N + 1)
    y = 2.0 + amp * np.cos(k * np.pi * r)
    d1 = apply_fd(y, 1.0 / N, 1, left="even", right="even")
    floor = 1e-13 * max(1.0, amp)
    assert abs(d1[0]) < floor and abs(d1[-1]) < floor
