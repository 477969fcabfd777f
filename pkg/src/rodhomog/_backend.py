"""Select compiled kernels when available, numpy fallback otherwise.

Set ``RODHOMOG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("RODHOMOG_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _fallback
        BACKEND = "python"

__all__ = ["kernels", "BACKEND", "_fallback"]
