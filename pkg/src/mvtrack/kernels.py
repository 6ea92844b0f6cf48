"""Backend selection for the clustering kernels.

The compiled extension is used when it imports; set ``MVTRACK_BACKEND=python``
to force the numpy fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

_requested = os.environ.get("MVTRACK_BACKEND", "").lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"MVTRACK_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")
_impl = BACKENDS[BACKEND]

propagable_linkage = _impl.propagable_linkage
complete_linkage_points = _impl.complete_linkage_points


def get_backend(name):
    """Kernel module by name (``"python"`` or ``"cython"``)."""
    return BACKENDS[name]


class use_backend:
    """Context manager rebinding the module-level kernels to ``name``."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        global propagable_linkage, complete_linkage_points, BACKEND
        self._saved = (propagable_linkage, complete_linkage_points, BACKEND)
        impl = BACKENDS[self.name]
        propagable_linkage = impl.propagable_linkage
        complete_linkage_points = impl.complete_linkage_points
        BACKEND = self.name
        return impl

    def __exit__(self, *exc):
        global propagable_linkage, complete_linkage_points, BACKEND
        propagable_linkage, complete_linkage_points, BACKEND = self._saved
        return False
