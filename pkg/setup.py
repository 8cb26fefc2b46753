"""Builds the optional compiled trial kernel.

The package runs without it (``casht._pykernel`` is the fallback), so a
failed compile only warns.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using the pure-Python kernel")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using the pure-Python kernel")


def extensions():
    if os.environ.get("CASHT_NO_EXTENSION"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "casht._kernel",
        ["src/casht/_kernel.pyx"],
        include_dirs=[np.get_include()],
        # no fast-math / FMA contraction: results must match the Python twin bit for bit
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
