import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "dunkl._paths",
                ["src/dunkl/_paths.pyx"],
                include_dirs=[numpy.get_include()],
                # no builtin sin/cos: gcc otherwise fuses the cos/sin
                # pair of the Box-Muller draw into glibc sincos, whose
                # results can differ from scalar sin/cos by 1 ulp; the
                # compiled engine must match the pure-Python mirror bit
                # for bit, so both have to call the same scalar routines
                # (contraction off for the same reason)
                extra_compile_args=["-O3", "-fno-builtin-sin",
                                    "-fno-builtin-cos",
                                    "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # building without Cython is fine: procsim falls back to the
    # pure-Python path engine at import time
    extensions = []

setup(ext_modules=extensions)
