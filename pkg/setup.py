"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: rlsched.backend falls
back to pure NumPy kernels when `rlsched._kernels` is missing, so a failed
compile only costs speed, never correctness.
"""

import warnings

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Treat extension build failures as a warning, not an install error."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"skipping compiled kernels ({exc}); using pure NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); using pure NumPy backend")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "rlsched._kernels",
                ["src/rlsched/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
