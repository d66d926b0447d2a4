from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernels bit-compatible with the
# scipy fallback path (no FMA contraction inside the accumulation loop).
extensions = [
    Extension(
        "spectralmesh._kernels._chebcore",
        ["src/spectralmesh/_kernels/_chebcore.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
        },
    )
)
