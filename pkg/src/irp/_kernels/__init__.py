"""Hot row-wise kernels with a compiled backend and a NumPy fallback.

The compiled extension ``_ckernels`` is used when it has been built; set
``IRP_PURE_PYTHON=1`` to force the NumPy implementations.
"""

import importlib
import os

__all__ = [
    "BACKEND",
    "gelu_bwd",
    "gelu_fwd",
    "layer_norm_bwd",
    "layer_norm_fwd",
    "load_backend",
    "mmr_greedy",
    "scatter_add_rows",
    "softmax_bwd",
    "softmax_fwd",
]

_MODULES = {"cython": "._ckernels", "python": "._pykernels"}


def load_backend(name):
    """Import one backend module by name (``"cython"`` or ``"python"``)."""
    return importlib.import_module(_MODULES[name], __name__)


def _select():
    if os.environ.get("IRP_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()

layer_norm_fwd = _impl.layer_norm_fwd
layer_norm_bwd = _impl.layer_norm_bwd
softmax_fwd = _impl.softmax_fwd
softmax_bwd = _impl.softmax_bwd
gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
scatter_add_rows = _impl.scatter_add_rows
mmr_greedy = _impl.mmr_greedy
