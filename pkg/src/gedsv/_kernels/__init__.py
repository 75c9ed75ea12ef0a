"""Kernel backend selection.

The compiled Cython module is preferred; the pure-Python reference
implementation is the fallback.  Set GEDSV_DISABLE_EXT=1 to force the
pure path (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _ref

if os.environ.get("GEDSV_DISABLE_EXT"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

filter_pass = _impl.filter_pass
backward_sample = _impl.backward_sample


def available_backends() -> dict:
    """Importable kernel modules keyed by name; used by tests and the benchmark."""
    out = {"python": _ref}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
