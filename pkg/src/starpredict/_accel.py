"""Numba/NumPy backend selection for the hot kernels.

Every hot kernel in :mod:`starpredict.kernels` ships in two variants: a
scalar-loop implementation compiled with numba's ``@njit`` and a pure-NumPy
path. The numba variant is used whenever numba imports cleanly; set the
environment variable ``STARPREDICT_NUMBA=0`` before importing the package to
force the NumPy fallback (useful for debugging and for the backend benchmark).
"""

import os

_flag = os.environ.get("STARPREDICT_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

NUMBA_ENABLED = _want_numba and HAVE_NUMBA


def compile_kernel(func, **opts):
    """Compile `func` with njit. Only call when numba is importable."""
    from numba import njit

    opts.setdefault("cache", True)
    opts.setdefault("nogil", True)
    return njit(**opts)(func)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
