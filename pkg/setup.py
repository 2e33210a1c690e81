import os

import numpy as np
from setuptools import setup

ext_modules = []
if os.environ.get("THERMOSD_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "thermosd._loop",
                    ["src/thermosd/_loop.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:  # no Cython: the pure-Python kernel is used
        pass

setup(ext_modules=ext_modules)
