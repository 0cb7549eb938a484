from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernel is optional: without it the package falls back to the
# pure-numpy backend selected in syran.kernels at import time.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "syran._kernel",
                ["src/syran/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
