import os

from setuptools import Extension, setup

# WAYMEMO_PURE=1 skips the compiled engine; the package then runs on the
# pure-Python fallback selected at import time.
ext_modules = []
if not os.environ.get("WAYMEMO_PURE"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "waymemo._kernels",
                ["src/waymemo/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
