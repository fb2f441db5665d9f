"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``IFSDIM_BACKEND=python`` to force the fallback.
"""

import os

from . import _pykernels

_requested = os.environ.get("IFSDIM_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as kernels  # type: ignore[attr-defined]

        NAME = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels
        NAME = "python"


def available() -> dict:
    """Name -> module for every backend that can be imported here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
