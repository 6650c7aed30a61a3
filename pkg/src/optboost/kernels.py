"""Backend selection for the hot loop.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``OPTBOOST_BACKEND=numpy`` to force the fallback.
"""

import os

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_requested = os.environ.get("OPTBOOST_BACKEND", "").strip().lower()

if _compiled is not None and _requested != "numpy":
    BACKEND = "cython"
    _impl = _compiled
else:
    BACKEND = "numpy"
    _impl = _fallback

HAVE_COMPILED = _compiled is not None

__all__ = ["BACKEND", "HAVE_COMPILED", "select_edge", "all_edges", "backends", "seq_sum"]


def select_edge(mistake_t, w):
    """Return ``(j, edge)`` for the row of maximal weighted agreement."""
    j, edge = _impl.select_edge(mistake_t, w)
    return int(j), float(edge)


def all_edges(mistake_t, w):
    return np.asarray(_impl.all_edges(mistake_t, w))


def backends():
    """Mapping of available backend name -> module."""
    out = {"numpy": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def seq_sum(x):
    """Sum in ascending index order (no pairwise reduction)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.cumsum(x)[-1])
