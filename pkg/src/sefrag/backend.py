"""Kernel backend selection.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback is loaded. ``SEFRAG_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _fallback


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def available() -> dict[str, ModuleType]:
    found = {"python": _fallback}
    compiled = _load_compiled()
    if compiled is not None:
        found["cython"] = compiled
    return found


def select(name: str | None = None) -> ModuleType:
    """Return the kernel module named ``name``, or the preferred one."""
    name = name or os.environ.get("SEFRAG_BACKEND", "").strip().lower() or None
    found = available()
    if name is None:
        return found.get("cython", _fallback)
    if name not in found:
        raise ImportError(f"kernel backend {name!r} is not available (have {sorted(found)})")
    return found[name]


kernels = select()
