import numpy
from setuptools import Extension, setup

# The HMM inner loops ship as an optional compiled extension; the package
# falls back to the numpy kernels at import time when the build is skipped.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "weaklab.denoiser._kernels_c",
                ["src/weaklab/denoiser/_kernels_c.pyx"],
                include_dirs=[numpy.get_include()],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
