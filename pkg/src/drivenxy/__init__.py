"""Driven-dissipative XY lattice simulation suite."""

__version__ = "0.1.0"

from .model import LatticeSpec, ModelParams  # noqa: F401
