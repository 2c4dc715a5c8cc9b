import os

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # no toolchain: install the pure-Python package only
    ext_modules = []
else:
    # -ffast-math is compile-only on purpose: linking it would pull in
    # crtfastmath.o and switch the whole process to flush-to-zero.
    cflags = os.environ.get("KME_DYN_CFLAGS", "-O3 -ffast-math -march=native").split()
    ext_modules = cythonize(
        [
            Extension(
                "kme_dyn._ckernels",
                ["src/kme_dyn/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                libraries=["mvec", "m"],
                extra_compile_args=cflags,
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
