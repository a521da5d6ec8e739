"""Build script for the optional compiled cube-sweep kernels.

The extension is marked optional: if no C toolchain is available the
package still installs and `oscilab.kernels` falls back to the NumPy
implementation at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # source tree without Cython: install pure-Python only
    ext_modules = []
else:
    ext = Extension(
        "oscilab.kernels._fast",
        ["src/oscilab/kernels/_fast.pyx"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
