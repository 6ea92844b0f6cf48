import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

EXTENSIONS = []
if USE_CYTHON and not os.environ.get("MVTRACK_NO_EXT"):
    EXTENSIONS = cythonize(
        [
            Extension(
                "mvtrack._ckernels",
                ["src/mvtrack/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=EXTENSIONS)
