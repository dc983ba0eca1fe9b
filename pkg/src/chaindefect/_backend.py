"""Select the residual kernel at import time.

The compiled extension is preferred.  Setting ``CHAINDEFECT_PURE_PYTHON=1``
forces the NumPy fallback.
"""
import os

from . import _fallback

BACKEND = "python"
residual_batch = _fallback.residual_batch

if os.environ.get("CHAINDEFECT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import residual_batch  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass
