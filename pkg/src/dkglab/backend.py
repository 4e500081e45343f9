"""Select the compiled core or the numpy fallback at import time.

Set ``DKGLAB_PURE_PYTHON=1`` to force the fallback even when the extension is
built.
"""
from __future__ import annotations

import os

from . import _pycore

if os.environ.get("DKGLAB_PURE_PYTHON"):
    core = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as core  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        core = _pycore
        BACKEND = "python"


def compiled_core():
    """The compiled module, or None when it is not built."""
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _core


__all__ = ["core", "BACKEND", "compiled_core"]
