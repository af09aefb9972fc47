"""Build the optional compiled tape kernel.  Without Cython (or a C
compiler) the package still installs and uses the pure-Python fallback."""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("pdlkit._kernel", ["src/pdlkit/_kernel.pyx"],
                   include_dirs=[numpy.get_include()])],
        language_level=3, quiet=True)
except ImportError:
    pass

setup(ext_modules=ext_modules)
