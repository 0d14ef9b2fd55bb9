"""Backend selection for the hot kernels.

The compiled extension (delayaudit._kernels, Cython) is preferred; the
pure-Python module delayaudit._kernels_py is a drop-in fallback. Set
DELAYAUDIT_PURE_PYTHON=1 to force the fallback, e.g. for benchmarking.
"""
from __future__ import annotations

import os

_FORCE_PY = os.environ.get("DELAYAUDIT_PURE_PYTHON", "").strip().lower() in (
    "1", "true", "yes")

if _FORCE_PY:
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]
        BACKEND = "python"

rk4_integrate = _impl.rk4_integrate
weiszfeld_single = _impl.weiszfeld_single
weiszfeld_batch = _impl.weiszfeld_batch
