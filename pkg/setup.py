"""Build script: compiles the optional Cython speedup kernels.

The package works without the extension (pure-Python kernels are selected at
import time), so a failed compile only costs speed, never functionality.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "flexride._speedups",
                ["src/flexride/_speedups.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environments without Cython
    print(f"flexride: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
