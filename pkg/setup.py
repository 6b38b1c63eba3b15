import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

here = os.path.join("src", "pktaccel")
ext_modules = []
if cythonize is not None and not os.environ.get("PKTACCEL_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "pktaccel._speedups",
                [os.path.join(here, "_speedups.pyx")],
                include_dirs=[here],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
