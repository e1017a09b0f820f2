import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tcp_adapt._simplex_core",
                ["src/tcp_adapt/_simplex_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    # Pure-python fallback is selected at import time; the package works
    # without the compiled kernel.
    ext_modules = []

setup(ext_modules=ext_modules)
