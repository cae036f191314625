"""Selects the simulation core at import time.

The compiled build is preferred when present. Setting ``QOSAODV_PURE=1``
forces the pure-Python modules, which behave identically.
"""

from __future__ import annotations

import os

from . import engine as _pure_engine

_compiled_engine = None
if os.environ.get("QOSAODV_PURE", "") != "1":
    try:
        from ._compiled import engine as _compiled_engine
    except ImportError:
        _compiled_engine = None

BACKEND = "compiled" if _compiled_engine is not None else "pure"
engine = _compiled_engine or _pure_engine
Simulator = engine.Simulator


def available() -> dict:
    """Engine modules keyed by backend name, for benchmarks and parity tests."""
    out = {"pure": _pure_engine}
    if _compiled_engine is not None:
        out["compiled"] = _compiled_engine
    return out
