import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("IFSDIM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # fall back to the pure-Python kernels
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "ifsdim._ckernels",
                    ["src/ifsdim/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # contraction to FMA would break bit-equality with the Python kernels
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
