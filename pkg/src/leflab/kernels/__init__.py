"""Kernel backend selection.

The stencil matvec and the RK4 shooting integrator dominate the runtime, so
both exist twice: a Cython extension (``_core``) and a NumPy reference
(``pyref``).  The compiled backend is picked automatically when importable;
set ``LEFLAB_KERNELS=python`` or ``LEFLAB_KERNELS=cython`` to force one.
"""

import os

from . import pyref

_requested = os.environ.get("LEFLAB_KERNELS", "auto").lower()
if _requested not in ("auto", "python", "cython"):
    raise ValueError(f"LEFLAB_KERNELS must be auto, python or cython, got {_requested!r}")

_impl = pyref
if _requested != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        _impl = pyref

neg_laplacian_1d = _impl.neg_laplacian_1d
neg_laplacian_2d = _impl.neg_laplacian_2d
rk4_terminal = _impl.rk4_terminal
rk4_profile = _impl.rk4_profile


def backend():
    """Name of the active backend: ``cython`` or ``python``."""
    return _impl.BACKEND
