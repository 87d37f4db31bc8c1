"""Backend switch for the hot kernels.

Set ``DRIVEBENCH_DISABLE_NUMBA=1`` to run the pure-numpy path; numba is used
otherwise (when importable).
"""
from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("DRIVEBENCH_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA: bool = _numba is not None and _numba_requested()


def jit(fn):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return _numba.njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
