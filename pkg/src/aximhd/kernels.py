"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting
``AXIMHD_BACKEND=python`` forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
tridiag_solve = _kernels_py.tridiag_solve
limited_advection = _kernels_py.limited_advection

if os.environ.get("AXIMHD_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        tridiag_solve = _kernels.tridiag_solve
        limited_advection = _kernels.limited_advection


def backend_module(name):
    """Return the kernel module for ``name`` in {"python", "cython"}."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
