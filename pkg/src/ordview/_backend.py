"""Kernel compilation toggle.

The hot numeric kernels in :mod:`ordview._kernels` are written so the same
source runs either compiled with numba or as plain Python over numpy arrays.
Which path is active is decided once, at import time:

* numba importable and ``ORDVIEW_NUMBA`` unset or truthy -> compiled path.
* ``ORDVIEW_NUMBA=0`` (or ``false``/``off``/``no``) -> pure numpy path.
* numba missing -> pure numpy path, silently.

Both paths produce bitwise identical results for the same inputs; the flag
only trades compilation latency against per-step speed.
"""

from __future__ import annotations

import os

__all__ = ["NUMBA_ENABLED", "jit", "backend_name"]


def _want_numba() -> bool:
    flag = os.environ.get("ORDVIEW_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_ENABLED = False
_njit = None
if _want_numba():
    try:
        from numba import njit as _njit  # type: ignore

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        NUMBA_ENABLED = False


def jit(fn):
    """Compile ``fn`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
