"""Kernel backend selection.

Imports the compiled Cython kernels when available, otherwise falls back to
the pure-Python twins. Set FLEXRIDE_PURE=1 to force the fallback (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FLEXRIDE_PURE"):
    _impl = _kernels_py
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "pure"

INF = _kernels_py.INF

scan_ride_insertions = _impl.scan_ride_insertions
search_cluster_route = _impl.search_cluster_route
