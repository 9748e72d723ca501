"""Build hook: optionally compile the hot simulation kernel with Cython.

The kernel lives in src/sipsim/_kernel.py (plain Python, the reference
implementation).  At build time it is copied to _kernel_c.py and compiled
in Cython pure-Python mode, producing the extension sipsim._kernel_c.
sipsim.kernel selects the extension at import when present and falls back
to the pure module otherwise, so installs without Cython still work.
"""

import shutil
from pathlib import Path

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    src = Path("src/sipsim/_kernel.py")
    gen = src.with_name("_kernel_c.py")
    shutil.copyfile(src, gen)
    ext_modules = cythonize(
        [Extension("sipsim._kernel_c", sources=[gen.as_posix()])],
        language_level="3",
    )

setup(ext_modules=ext_modules)
