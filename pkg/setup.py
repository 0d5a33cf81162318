"""Build the optional compiled simulator loops.

If Cython or a C compiler is missing the package still installs and the
simulator falls back to its pure-Python loops.
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
                "polling_lab._speedups",
                ["src/polling_lab/_speedups.pyx"],
                # no fused multiply-add: keeps results bit-identical to the Python loops
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
