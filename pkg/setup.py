# Builds the optional compiled kernels; the package falls back to pure Python
# when the extension is missing.
import os

from setuptools import setup

ext_modules = []
if os.environ.get("MMUSIM_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mmusim._lru",
                    ["src/mmusim/_lru.pyx"],
                    language="c++",
                    extra_compile_args=["-O2", "-std=c++17"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
