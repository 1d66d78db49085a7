"""Numba backend selection.

The hot integration kernels are JIT-compiled with numba by default. Setting
the environment variable ``ODEFIT_DISABLE_NUMBA=1`` before import forces the
pure-numpy fallback everywhere (useful for debugging and for the backend
benchmark in ``benchmarks/backend_bench.py``).
"""

import os

DISABLE_ENV_VAR = "ODEFIT_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(DISABLE_ENV_VAR, "").strip().lower() in ("1", "true", "yes", "on")


if _disabled_by_env():
    NUMBA_ENABLED = False
    njit = None
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
        njit = None
