import numpy as np
from setuptools import Extension, setup

# The compiled patch kernels are optional: if Cython (or a C compiler) is
# missing the build still succeeds and skelwatch falls back to the numpy
# implementations in skelwatch.kernels.pyref.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "skelwatch.kernels._convkern",
                ["src/skelwatch/kernels/_convkern.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)

# python setup.py build_ext --inplace
