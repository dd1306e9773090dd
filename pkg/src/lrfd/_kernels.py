"""Kernel selection: compiled Jacobi core if it was built, numpy fallback otherwise.

Set ``LRFD_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _jacobi_py

if os.environ.get("LRFD_PURE_PYTHON", "") not in ("", "0"):
    jacobi_orthogonalize = _jacobi_py.jacobi_orthogonalize
    BACKEND = "python"
else:
    try:
        from ._jacobi import jacobi_orthogonalize
        BACKEND = "cython"
    except ImportError:
        jacobi_orthogonalize = _jacobi_py.jacobi_orthogonalize
        BACKEND = "python"
