"""Build hooks: compile the optional EDT core when a toolchain is present.

The package is fully functional without the extension (a numpy fallback
covers the same exact computation); any build failure downgrades to a
warning instead of failing the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing; pure-python install
            warnings.warn(f"skipping compiled EDT core: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled EDT core ({ext.name}): {exc}")


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/oar_evalkit/_edt_core.pyx"],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False,
                             "cdivision": True},
    )
except Exception as exc:
    warnings.warn(f"Cython unavailable, skipping compiled EDT core: {exc}")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
