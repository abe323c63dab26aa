"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy/SciPy
fallback is selected at import time), so any compilation failure here
downgrades to a pure-Python install instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "volseg._kernels._ext",
        ["src/volseg/_kernels/_ext.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except Exception as exc:  # noqa: BLE001 - any build-time failure means pure install
    print(f"volseg: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
