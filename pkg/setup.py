import os

from setuptools import Extension, setup

# The compiled kernels are an optional fast path: the package falls back to
# the pure-Python implementations in delayaudit._kernels_py when the
# extension is absent (see delayaudit.kernels).
ext_modules = []
if os.environ.get("DELAYAUDIT_SKIP_EXT", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("delayaudit._kernels", ["src/delayaudit/_kernels.pyx"])],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
