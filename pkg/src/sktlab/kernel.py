"""Simulation backend selection: compiled extension with pure-Python fallback.

The compiled core (_simcore) is preferred when importable; set
SKTLAB_KERNEL=python or =compiled to force a backend.  Both backends
produce bitwise-identical paths from the same seed.
"""

from __future__ import annotations

import os

from . import _simpy

try:
    from . import _simcore
except ImportError:  # pragma: no cover - build-environment dependent
    _simcore = None

_FORCED = os.environ.get("SKTLAB_KERNEL", "").strip().lower()

BACKEND = "compiled" if (_simcore is not None and _FORCED != "python") else "python"
if _FORCED == "compiled" and _simcore is None:
    raise ImportError("SKTLAB_KERNEL=compiled but the extension is not built")


def get_kernel(backend: str | None = None):
    """Return the kernel module for `backend` (default: the selected one)."""
    b = backend or BACKEND
    if b == "compiled":
        if _simcore is None:
            raise RuntimeError("compiled kernel unavailable; build the extension")
        return _simcore
    if b == "python":
        return _simpy
    raise ValueError(f"unknown backend {b!r}")
