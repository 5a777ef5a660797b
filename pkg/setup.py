"""Build script for the optional compiled forest kernel.

The package works without the extension (a pure-Python twin of the kernel
is selected at import time), so a failed compile only costs speed.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernel if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            warnings.warn(f"compiled forest kernel skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled forest kernel skipped: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; building without the forest kernel")
        return []
    ext = Extension(
        "surrhet.learners._forest_cy",
        ["src/surrhet/learners/_forest_cy.pyx"],
        # -ffp-contract=off: the pure-Python twin must match bit for bit,
        # so FMA contraction of a*b+c expressions is not allowed.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
