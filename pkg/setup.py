"""Build the optional compiled kernels; the package imports a numpy fallback
when the extension is absent."""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SEFRAG_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "sefrag._kernels",
                    ["src/sefrag/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    libraries=["crypto"],
                    extra_compile_args=["-O3", "-Wno-deprecated-declarations"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
