"""Build script for the optional compiled Monte Carlo kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.  Build in place with

    python3 setup.py build_ext --inplace
"""

import numpy
from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        ["src/decoyrate/_fastloop.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []


class BuildFailed(Exception):
    pass


def run_setup(with_ext):
    setup(
        ext_modules=extensions if with_ext else [],
        include_dirs=[numpy.get_include()],
    )


try:
    run_setup(True)
except (CCompilerError, ExecError, PlatformError, BuildFailed):
    run_setup(False)
