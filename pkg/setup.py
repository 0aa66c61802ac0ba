"""Build script: compiles the optional native kernels.

The package works without the extension (the numpy backend is selected at
import time); a failed compile therefore only prints a warning instead of
aborting the install. Set VOSMEM_NO_NATIVE=1 to skip the build entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that degrades to a warning when no compiler is usable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing toolchain
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # compile/link failure
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: native kernels not built ({exc}); "
              "vosmem will fall back to the numpy backend")


def extensions():
    if os.environ.get("VOSMEM_NO_NATIVE") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping native kernel build")
        return []
    ext = Extension(
        "vosmem.kernels._native",
        ["src/vosmem/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
