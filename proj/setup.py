"""Builds the pybind11 extension through the project's CMake configuration.

Use `pip install . --no-build-isolation` (or `-e .` for development); the
sandbox package mirror serves no build backends, so the pre-installed
setuptools drives CMake directly.
"""

import subprocess
import sys
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent

        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DCPKRYLOV_BUILD_PYTHON=ON",
                "-DCPKRYLOV_BUILD_TESTS=OFF",
                "-DCPKRYLOV_BUILD_CLI=OFF",
                f"-DPYTHON_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_cpkrylov", "-j"],
            check=True,
        )

        staged = build_dir / "python" / "cpkrylov"
        out_dir.mkdir(parents=True, exist_ok=True)
        for so in staged.glob("_cpkrylov*"):
            self.copy_file(str(so), str(out_dir / so.name))


setup(
    packages=["cpkrylov"],
    package_dir={"cpkrylov": "python/cpkrylov"},
    ext_modules=[CMakeExtension("cpkrylov._cpkrylov")],
    cmdclass={"build_ext": CMakeBuild},
    zip_safe=False,
)
