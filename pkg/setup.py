"""Build the optional compiled kernels; the package falls back to numpy without them."""

import os

import numpy as np
from setuptools import setup

ext_modules = []
if os.environ.get("ONESIDED_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        npy = os.path.dirname(np.__file__)
        ext = Extension(
            "onesided._kernels",
            ["src/onesided/_kernels.pyx"],
            include_dirs=[np.get_include()],
            library_dirs=[os.path.join(npy, "random", "lib"), os.path.join(npy, "_core", "lib")],
            libraries=["npyrandom", "npymath"],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
