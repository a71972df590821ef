"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``PBNKIT_PURE_PYTHON`` is set to a nonempty value other
than ``0``, the pure-Python kernels are used.  ``BACKEND`` names the choice.
"""
import os

from . import _pykernels

_force_python = os.environ.get("PBNKIT_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure Python requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

backward_induction = _impl.backward_induction
simulate_batch = _impl.simulate_batch


def available_backends() -> dict:
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
