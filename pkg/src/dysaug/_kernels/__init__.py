"""Hot numerical kernels.

The compiled Cython extension is used when it has been built; otherwise the
numpy fallback in :mod:`._pykernels` is selected. Setting the environment
variable ``DYSAUG_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("DYSAUG_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

wsola_best_offset = _impl.wsola_best_offset
sinc_resample = _impl.sinc_resample
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = ["BACKEND", "available_backends", "wsola_best_offset", "sinc_resample",
           "conv2d_forward", "conv2d_backward"]
