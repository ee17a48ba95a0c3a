"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``GALLA_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("GALLA_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"


def scatter_add_rows(out: np.ndarray, index: np.ndarray, src: np.ndarray) -> np.ndarray:
    """Accumulate rows of ``src`` into ``out`` at ``index`` (in place); returns ``out``.

    ``out`` and ``src`` are 2-D and share a floating dtype.
    """
    index = np.ascontiguousarray(index, dtype=np.int64)
    src = np.ascontiguousarray(src, dtype=out.dtype)
    if _compiled is not None and out.flags.c_contiguous and out.dtype in (np.float32, np.float64):
        _compiled.scatter_add_rows(out, index, src)
    else:
        _kernels_py.scatter_add_rows(out, index, src)
    return out
