"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a NumPy reference
implementation is selected at import time), so the extension is marked
optional: a missing compiler degrades to the pure-Python backend instead of
failing the install.  Build in place with

    python setup.py build_ext --inplace
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    extensions = [
        Extension(
            "leflab.kernels._core",
            ["src/leflab/kernels/_core.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
            optional=True,
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
