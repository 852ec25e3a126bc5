"""Build script for the compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), but the compiled kernels make the Monte-Carlo harness far
faster.  -ffp-contract=off keeps the compiled arithmetic bit-compatible with
the numpy fallback (no fused multiply-add).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build-time only
    cythonize = None

extensions = [
    Extension(
        "privhvac._kernels",
        ["src/privhvac/_kernels.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
