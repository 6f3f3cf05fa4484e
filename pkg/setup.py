"""Builds the optional compiled chain kernel.

If Cython or a C toolchain with OpenSSL headers is missing, the package
installs without it and ``vpkiaas.chain`` falls back to pure Python.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using pure Python")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc}); using pure Python")


try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vpkiaas._chain_ext",
                ["src/vpkiaas/_chain_ext.pyx"],
                libraries=["crypto"],
                extra_compile_args=["-O3", "-Wno-deprecated-declarations"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
