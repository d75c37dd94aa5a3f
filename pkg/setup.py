"""Builds the optional compiled simplex kernel; the package falls back to NumPy without it."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("WEAKNESSLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("weaknesslab._simplex", ["src/weaknesslab/_simplex.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"], optional=True)],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
