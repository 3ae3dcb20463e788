"""Build script for the optional compiled kernel.

The package is pure Python except for natmo.kernels._fast, a Cython
translation of natmo.kernels.pyref.  The extension is marked optional:
if no C toolchain (or Cython) is available the install still succeeds
and the package falls back to the NumPy kernels at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext = Extension(
        "natmo.kernels._fast",
        ["src/natmo/kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
    for mod in ext_modules:
        mod.optional = True
except ImportError:
    pass

setup(ext_modules=ext_modules)
