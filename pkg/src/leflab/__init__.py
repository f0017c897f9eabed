"""Numerical laboratory for concave-convex Lane-Emden-Fowler Dirichlet
problems  -lap u = lam*k(x)*u^q +- h(x)*u^p  on the unit interval/square."""

from .kernels import backend as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
