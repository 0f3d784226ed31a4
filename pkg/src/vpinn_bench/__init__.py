"""Variational physics-informed neural network solvers and benchmark runner."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("vpinn-bench")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"
finally:
    del version, PackageNotFoundError
