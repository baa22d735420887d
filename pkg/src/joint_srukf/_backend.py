"""Kernel backend selection.

The compiled extension is preferred; set ``JOINT_SRUKF_PURE_PYTHON=1`` to
force the numpy fallback (useful for debugging and for the benchmark).
"""
import os

if os.environ.get("JOINT_SRUKF_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
