"""Build hook for the optional compiled port kernel."""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SLICEISO_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize([Extension("sliceiso.sim._rrport", ["src/sliceiso/sim/_rrport.pyx"])],
                                compiler_directives={"language_level": 3}, quiet=True)

setup(ext_modules=ext_modules)
