"""Cube-sweep kernels: compiled fast path with a NumPy fallback.

The compiled extension is optional; if it failed to build (or was never
built) the NumPy implementation is selected at import time.  Use
``backend()`` to see which one is active and ``reference()`` to reach
the NumPy implementation explicitly (benchmarks compare the two).
"""

from . import _ref

try:
    from . import _fast as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _ref
    BACKEND = "numpy"

osc_sweep_2d = _impl.osc_sweep_2d
osc_sweep_3d = _impl.osc_sweep_3d


def backend():
    return BACKEND


def reference():
    return _ref
