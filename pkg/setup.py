"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes the hot inner loops faster.
"""

from setuptools import setup
from setuptools.extension import Extension

import numpy

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "modewatch.kernels._native",
                ["src/modewatch/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    extensions = []

setup(ext_modules=extensions)
