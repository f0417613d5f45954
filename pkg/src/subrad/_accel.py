"""Numba switch shared by every hot kernel.

Set ``SUBRAD_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
DISABLED = os.environ.get("SUBRAD_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is importable, else return it untouched."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
