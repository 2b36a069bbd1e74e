import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: graphmill falls back to the pure-Python
# twin at import time when the extension is unavailable.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "graphmill._kernel",
                ["src/graphmill/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
