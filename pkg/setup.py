"""Build script.

The compiled extension is optional: if Cython or a C compiler is missing the
package installs anyway and falls back to pure-numpy implementations of the
pairwise kernels.
"""
import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rieszwave._kernels._speedups",
                sources=["src/rieszwave/_kernels/_speedups.pyx"],
            )
        ],
        language_level="3",
    )
    for ext in ext_modules:
        ext.include_dirs = [numpy.get_include()]
        ext.define_macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"building without compiled kernels: {exc}", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
