import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the NumPy fallback is used at runtime
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("IRP_NO_EXTENSIONS", "") in ("", "0"):
    ext_modules = cythonize(
        [
            Extension(
                "irp._kernels._ckernels",
                ["src/irp/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
