"""Build script: compiles the optional C++ engine core when Cython is available.

The package works without the extension (a pure-Python core is selected at
import time), so build failures downgrade to a warning instead of aborting
the install. Set DELTANET_NO_EXT=1 to skip the extension build entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Tolerate compiler failures; the pure-Python core remains usable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the compiled core failed ({exc}); "
            "falling back to the pure-Python core",
            file=sys.stderr,
        )


ext_modules = []
if os.environ.get("DELTANET_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "deltanet._ccore",
                    ["src/deltanet/_ccore.pyx"],
                    language="c++",
                    extra_compile_args=["-O2", "-std=c++17"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        print("WARNING: Cython not available; skipping compiled core", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
