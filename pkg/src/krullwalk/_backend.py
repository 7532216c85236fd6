"""Kernel backend selection.

The compiled extension is used when it imports; setting
``KRULLWALK_PURE_PYTHON=1`` forces the pure-Python kernels.
"""

import os

from . import _kernels_py

if os.environ.get("KRULLWALK_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
