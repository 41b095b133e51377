"""Hot numeric kernels, each in a numba and a pure-NumPy variant.

The active backend is chosen at import time (see :mod:`starpredict._accel`);
``STARPREDICT_NUMBA=0`` selects the NumPy path. `benchmarks/bench_backends.py`
times both variants side by side.
"""

from .._accel import NUMBA_ENABLED, backend_name

from . import cooc, gbdt, sgns, walks  # noqa: E402,F401

__all__ = ["NUMBA_ENABLED", "backend_name", "cooc", "gbdt", "sgns", "walks"]
