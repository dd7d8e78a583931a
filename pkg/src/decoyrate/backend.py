"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Set ``DECOYRATE_BACKEND=python`` or ``=compiled`` to
force a choice (the benchmark and the backend-equivalence tests do).
"""

import os

from . import _slowloop

try:
    from . import _fastloop
except ImportError:  # extension not built on this interpreter
    _fastloop = None

__all__ = ["get_impl", "backend_name", "available_backends"]


def _forced() -> str:
    return os.environ.get("DECOYRATE_BACKEND", "").strip().lower()


def get_impl():
    forced = _forced()
    if forced == "python":
        return _slowloop
    if forced == "compiled":
        if _fastloop is None:
            raise ImportError(
                "DECOYRATE_BACKEND=compiled but the extension is not built; "
                "run `python3 setup.py build_ext --inplace`"
            )
        return _fastloop
    if forced:
        raise ValueError(f"unknown DECOYRATE_BACKEND {forced!r}")
    return _fastloop if _fastloop is not None else _slowloop


def backend_name() -> str:
    return "compiled" if get_impl() is _fastloop else "python"


def available_backends() -> dict:
    out = {"python": _slowloop}
    if _fastloop is not None:
        out["compiled"] = _fastloop
    return out
