"""Kernel selection: compiled extension when importable, else pure Python.

Set ``PROTOLOOP_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("PROTOLOOP_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

jaccard = _impl.jaccard
mean_pairwise_jaccard = _impl.mean_pairwise_jaccard
max_jaccard = _impl.max_jaccard
novelties = _impl.novelties
farthest_point_order = _impl.farthest_point_order

__all__ = [
    "BACKEND",
    "jaccard",
    "mean_pairwise_jaccard",
    "max_jaccard",
    "novelties",
    "farthest_point_order",
]
