import os

from setuptools import setup

ext_modules = []
if os.environ.get("LRFD_PURE_PYTHON", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "lrfd._jacobi",
                    ["src/lrfd/_jacobi.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython at build time: the package falls back to lrfd._jacobi_py
        ext_modules = []

setup(ext_modules=ext_modules)
