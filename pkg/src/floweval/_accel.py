"""JIT selection.

Set ``FLOWEVAL_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time; when numba is missing the numpy path is used anyway.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}

NUMBA_DISABLED = os.environ.get("FLOWEVAL_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba ships with the dev environment
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED


def maybe_njit(func):
    """Compile ``func`` with numba when available, otherwise return it untouched."""
    if not HAS_NUMBA:
        return func
    from numba import njit

    return njit(cache=True, nogil=True)(func)
