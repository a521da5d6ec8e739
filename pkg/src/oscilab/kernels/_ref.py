"""Pure-NumPy cube-sweep kernels (fallback when the extension is absent).

Sliding windows are chunked along the first anchor axis so the largest
temporary stays below ``_CHUNK_DOUBLES`` doubles.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_CHUNK_DOUBLES = 1 << 23


def _window_osc(win, comp_axis, q):
    # win: (..., ncomp, side, ..., side) with cube axes trailing
    cube_axes = tuple(range(comp_axis + 1, win.ndim))
    mean = win.mean(axis=cube_axes, keepdims=True)
    dev = win - mean
    norm2 = (dev * dev).sum(axis=comp_axis)
    cube_axes = tuple(range(comp_axis, norm2.ndim))
    if q == 2.0:
        return np.sqrt(norm2.mean(axis=cube_axes))
    if q == 1.0:
        return np.sqrt(norm2).mean(axis=cube_axes)
    return np.sqrt(norm2).__pow__(q).mean(axis=cube_axes) ** (1.0 / q)


def osc_sweep_2d(vals, valid, side, q):
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    ax = vals.shape[0] - side + 1
    ay = vals.shape[1] - side + 1
    ncomp = vals.shape[2]
    if valid.shape != (ax, ay):
        raise ValueError("validity mask does not match anchor counts")
    out = np.full((ax, ay), -1.0)
    win = sliding_window_view(vals, (side, side), axis=(0, 1))  # (ax, ay, C, s, s)
    rows = max(1, _CHUNK_DOUBLES // max(1, ay * ncomp * side * side))
    for lo in range(0, ax, rows):
        hi = min(ax, lo + rows)
        out[lo:hi] = _window_osc(win[lo:hi], comp_axis=2, q=q)
    out[~valid.astype(bool)] = -1.0
    return out


def osc_sweep_3d(vals, valid, side, q):
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    ax = vals.shape[0] - side + 1
    ay = vals.shape[1] - side + 1
    az = vals.shape[2] - side + 1
    ncomp = vals.shape[3]
    if valid.shape != (ax, ay, az):
        raise ValueError("validity mask does not match anchor counts")
    out = np.full((ax, ay, az), -1.0)
    win = sliding_window_view(vals, (side, side, side), axis=(0, 1, 2))
    rows = max(1, _CHUNK_DOUBLES // max(1, ay * az * ncomp * side**3))
    for lo in range(0, ax, rows):
        hi = min(ax, lo + rows)
        out[lo:hi] = _window_osc(win[lo:hi], comp_axis=3, q=q)
    out[~valid.astype(bool)] = -1.0
    return out
