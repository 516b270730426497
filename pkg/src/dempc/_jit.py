"""Numba switch.

Set ``DEMPC_NUMBA=0`` before import to force the pure-numpy kernels. When numba
is missing the numpy path is used regardless of the flag.
"""

import os

_FLAG = os.environ.get("DEMPC_NUMBA", "1").strip().lower()
REQUESTED = _FLAG not in ("0", "false", "no", "off")

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = REQUESTED and HAVE_NUMBA

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with the package defaults, or return it untouched."""
    if _njit is None:
        return func
    return _njit(**numba_default)(func)
