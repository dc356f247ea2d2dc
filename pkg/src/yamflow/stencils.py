"""Finite-difference stencils on uniform 1-d grids.

Weights for arbitrary derivative order and node offsets come from the
divided-difference recursion, so centered, one-sided and parity-extended
stencils all share one code path.  Radial profiles on [0, 1] need three
edge treatments:

  * ``onesided``  shifted windows near the edge (measurement of given data),
  * ``even``      ghost nodes y[-k] = y[k]   (smooth scalar at a cap pole,
                  or a Neumann reflection closure),
  * ``odd``       ghost nodes y[-k] = -y[k]  (warping function at a cap pole).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Stencil weights for d^m/dx^m at x=0 from nodes at integer `offsets`.

    Unit grid spacing; scale by dx**-deriv for a physical grid.
    """
    x = np.asarray(offsets, dtype=float)
    npts = len(x)
    if deriv >= npts:
        raise ValueError("need more than deriv+1 nodes")
    c = np.zeros((npts, deriv + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0]
    for i in range(1, npts):
        mn = min(i, deriv)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    w = c[:, deriv].copy()
    if deriv > 0:
        # exact annihilation of constants: roundoff in the zeroth moment
        # would otherwise be amplified by dx**-deriv
        w[np.argmax(np.abs(w))] -= w.sum()
    return w


def _extend(y: np.ndarray, side: str, mode: str, pad: int) -> np.ndarray:
    if mode == "onesided":
        return y
    if side == "left":
        ghost = y[pad:0:-1]
    else:
        ghost = y[-2:-(pad + 2):-1]
    if mode == "odd":
        # point reflection about the edge node; plain sign flip when the
        # edge value is 0 (warping function at a cap pole)
        ghost = 2.0 * y[0 if side == "left" else -1] - ghost
    elif mode != "even":
        raise ValueError(f"unknown edge mode {mode!r}")
    return np.concatenate([ghost, y]) if side == "left" else np.concatenate([y, ghost])


def apply_fd(y, dr: float, deriv: int, acc: int = 6,
             left: str = "onesided", right: str = "onesided") -> np.ndarray:
    """Derivative of nodal values `y` on a uniform grid of spacing `dr`.

    `acc` sets the centered interior accuracy (2, 4 or 6); edge windows are
    shifted when a side is ``onesided`` and keep at least that formal order
    for deriv=1 (one less for deriv=2, still >= 2 for acc >= 4).
    """
    y = np.asarray(y, dtype=float)
    width = acc + 1 if acc % 2 == 0 else acc + 2
    if deriv >= width - 1:
        width = deriv + 3
    half = width // 2
    if y.size < width:
        raise ValueError("grid too coarse for requested stencil")

    ext = y
    nl = 0
    if left in ("even", "odd"):
        ext = _extend(ext, "left", left, half)
        nl = half
    if right in ("even", "odd"):
        ext = _extend(ext, "right", right, half)

    out = np.empty_like(y)
    centered = fd_weights(tuple(range(-half, half + 1)), deriv) / dr ** deriv
    windows = np.lib.stride_tricks.sliding_window_view(ext, width)
    # nodes whose centered window fits inside the (extended) array
    lo = max(0, half - nl)          # first original node with a centered window
    hi = y.size - (0 if right in ("even", "odd") else half)
    rows = windows[lo + nl - half: hi + nl - half]
    # anchor subtraction keeps constants exactly annihilated under any
    # summation order (weights sum to zero only in sequential order)
    out[lo:hi] = (rows - rows[:, half:half + 1]) @ centered
    # one-sided leftovers
    for j in range(0, lo):
        offs = tuple(np.arange(width) - j)
        out[j] = (fd_weights(offs, deriv) / dr ** deriv) @ (y[:width] - y[j])
    for j in range(hi, y.size):
        start = y.size - width
        offs = tuple(np.arange(start, y.size) - j)
        out[j] = (fd_weights(offs, deriv) / dr ** deriv) @ (y[start:] - y[j])
    return out


def edge_derivative(y, dr: float, side: str, deriv: int = 1, width: int = 7) -> float:
    """One-sided derivative at the first or last node (measurement stencil)."""
    y = np.asarray(y, dtype=float)
    if y.size < width:
        width = y.size
    if side == "left":
        offs = tuple(range(width))
        return float((fd_weights(offs, deriv) / dr ** deriv) @ (y[:width] - y[0]))
    offs = tuple(range(-(width - 1), 1))
    return float((fd_weights(offs, deriv) / dr ** deriv) @ (y[-width:] - y[-1]))


def zero_slope_boundary_value(y, side: str, width: int = 7) -> float:
    """Value at the edge node making the one-sided first derivative vanish.

    Used to re-impose a Neumann condition nodally after a flow step.
    """
    y = np.asarray(y, dtype=float)
    if y.size < width:
        width = y.size
    if side == "left":
        w = fd_weights(tuple(range(width)), 1)
        return float(-(w[1:] @ y[1:width]) / w[0])
    w = fd_weights(tuple(range(-(width - 1), 1)), 1)
    return float(-(w[:-1] @ y[-width:-1]) / w[-1])


def observed_orders(errors, factor: float = 2.0) -> list:
    """log-ratio convergence orders of an error sequence under refinement by `factor`."""
    e = [abs(v) for v in errors]
    out = []
    for a, b in zip(e, e[1:]):
        if b == 0:
            out.append(np.inf)
        else:
            out.append(float(np.log(a / b) / np.log(factor)))
    return out


def orders_from_sequence(values, factor: float = 2.0) -> list:
    """Convergence orders when the limit is unknown, from successive differences.

    values[k] is the quantity computed at refinement level k; returns the
    observed order of |v[k] - v[k+1]| between consecutive levels.
    """
    diffs = [abs(a - b) for a, b in zip(values, values[1:])]
    return observed_orders(diffs, factor)
