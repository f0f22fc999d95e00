"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``OPSTAT_BACKEND=python`` is set, the numpy fallback
is used. Both expose ``euler_maruyama``, ``clip_cells`` and ``rasterize``.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("OPSTAT_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

euler_maruyama = _impl.euler_maruyama
clip_cells = _impl.clip_cells
rasterize = _impl.rasterize


def available_backends():
    out = {"python": _fallback}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
