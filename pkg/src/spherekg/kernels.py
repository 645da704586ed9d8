"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``SPHEREKG_PURE=1`` to force the fallback.
"""
import os

from . import _fallback
from ._fallback import ANGLE, HOUSEHOLDER, QUAT, quat_matrix  # noqa: F401

_compiled = None
if os.environ.get("SPHEREKG_PURE") != "1":
    try:
        from . import _ckernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"
_impl = _compiled if _compiled is not None else _fallback


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``/``"numpy"``) or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def rotate(kind, params, rel, x, inverse=False):
    return _impl.rotate(kind, params, rel, x, inverse)


def rotate_vjp(kind, params, rel, x, g, inverse=False, grad_params=None):
    return _impl.rotate_vjp(kind, params, rel, x, g, inverse, grad_params)


def query_distances(queries, centers, threads=1):
    return _impl.query_distances(queries, centers, threads)


def scatter_add_rows(out, idx, rows, scale=1.0):
    return _impl.scatter_add_rows(out, idx, rows, scale)


def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    return _impl.adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2)
