"""CMake-driven build of the srecon._core extension module."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        extdir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).resolve().parent
        cfg = "Debug" if self.debug else "Release"
        args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DSR_BUILD_PYTHON=ON",
            f"-DPython_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(["cmake", "-S", str(source_dir), "-B", str(build_dir), *args], check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core",
             "--parallel", str(os.cpu_count() or 2)],
            check=True,
        )
        out = build_dir / "python" / "srecon"
        extdir.mkdir(parents=True, exist_ok=True)
        for so in out.glob("_core*.so"):
            self.copy_file(str(so), str(extdir / so.name))


setup(
    ext_modules=[CMakeExtension("srecon._core")],
    cmdclass={"build_ext": CMakeBuild},
)
