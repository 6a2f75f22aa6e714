"""Builds the optional Cython kernel extension.

The package works without it (a pure-NumPy backend is selected at import
time), but training is an order of magnitude faster with the compiled core.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source dist without cython
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "earlybenefit.neuralcore._backend_cy",
                ["src/earlybenefit/neuralcore/_backend_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
