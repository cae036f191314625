"""Builds the optional compiled simulation core.

Cython compiles the behaviour modules a second time into ``qosaodv._compiled``.
The pure-Python originals stay importable and serve as the fallback.
"""

import os

from setuptools import Extension, setup

CORE_MODULES = ("engine", "queueing", "routing", "mobility")


def compiled_extensions():
    if os.environ.get("QOSAODV_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [Extension(f"qosaodv._compiled.{name}", [f"src/qosaodv/{name}.py"],
                      extra_compile_args=["-O2"])
            for name in CORE_MODULES]
    return cythonize(exts, compiler_directives={"language_level": "3"},
                     build_dir="build/cython", quiet=True)


setup(ext_modules=compiled_extensions())
