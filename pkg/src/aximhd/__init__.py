"""Axisymmetric MHD with vertical-only viscosity: solver and estimate monitors."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
