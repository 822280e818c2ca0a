"""Build script: compiles the stream core extension.

The package works without the extension (a pure-Python twin is selected at
import time), so a failed compile should not block installation.  We therefore
attempt the Cython build and fall back to a pure-Python distribution if the
toolchain is unavailable.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "exactchain._core",
                sources=["src/exactchain/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
