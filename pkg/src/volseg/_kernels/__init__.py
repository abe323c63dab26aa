"""Kernel backend selection: compiled extension when built, NumPy otherwise.

Set ``VOLSEG_BACKEND=pure`` or ``VOLSEG_BACKEND=ext`` to force a choice
(the latter fails loudly if the extension was not compiled).
"""

from __future__ import annotations

import os

from . import _pure

try:
    from . import _ext
except ImportError:
    _ext = None

_FORCED = os.environ.get("VOLSEG_BACKEND", "").strip().lower()
if _FORCED == "pure":
    _active = _pure
elif _FORCED == "ext":
    if _ext is None:
        raise ImportError("VOLSEG_BACKEND=ext but the compiled extension is missing")
    _active = _ext
else:
    _active = _ext if _ext is not None else _pure


def get_backend():
    """The active kernel module (attributes: name, surface_mask, confusion_counts, min_dists)."""
    return _active


def set_backend(name: str) -> None:
    """Switch backends at runtime; mainly for tests and benchmarks."""
    global _active
    if name == "pure":
        _active = _pure
    elif name == "ext":
        if _ext is None:
            raise ImportError("compiled extension not available")
        _active = _ext
    else:
        raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["pure"] + (["ext"] if _ext is not None else [])
