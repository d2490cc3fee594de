"""Build hook for the optional compiled coverage kernels.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the per-execution bitmap scans faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "meshfuzz._covkern",
                ["src/meshfuzz/_covkern.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
