"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here degrades to the pure path instead
of failing the install.
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "probfp._kernels_cy",
                ["src/probfp/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # noqa: BLE001 - degrade to pure python
    print(f"skipping compiled kernels ({exc}); pure-python fallback will be used")

setup(ext_modules=extensions)
