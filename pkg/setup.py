"""Build script for the compiled event-loop kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile only costs speed. The try/except keeps
installs alive on boxes without a C toolchain.
"""
from pathlib import Path

import numpy
from setuptools import Extension, setup

PYX = Path(__file__).parent / "src" / "logifv" / "_engine_cy.pyx"

try:
    from Cython.Build import cythonize

    # fp-contract off: the compiled kernel must reproduce the pure-Python
    # lane bit for bit, so FMA fusion of a*b+c is not allowed
    ext = Extension(
        "logifv._engine_cy",
        ["src/logifv/_engine_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={"language_level": 3},
    ) if PYX.exists() else []
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
