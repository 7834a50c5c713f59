"""Kernel selection: compiled Cython extension if importable, else pure Python.

Set the environment variable SPIKESLAB_PURE=1 before import to force the
pure backend (used by the parity tests and the kernel benchmark).
"""

import os

from . import _pure

if os.environ.get("SPIKESLAB_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

pg_draw = _impl.pg_draw
pg_draws = _impl.pg_draws
z_scan = _impl.z_scan


def backends():
    """All importable backends as (name, module) pairs."""
    out = [("pure", _pure)]
    try:
        from . import _speedups

        out.append(("compiled", _speedups))
    except ImportError:
        pass
    return out
