"""Build script for the optional compiled kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed compile only costs speed.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    # The C distribution functions live in a static helper library shipped
    # inside numpy.random.
    random_lib = os.path.join(os.path.dirname(numpy.random.__file__), "lib")
    ext_modules = cythonize(
        [
            Extension(
                "snowsim.kernels._core",
                ["src/snowsim/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                library_dirs=[random_lib],
                libraries=["npyrandom"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
