"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``JADCE_PURE_PYTHON=1`` is set) the numpy fallback is used. ``BACKEND``
names the active one.

Only soft-thresholding is routed to the extension. The two log1p kernels
stay on numpy even when it is compiled: numpy's vectorised log1p beats the
scalar libm call (see ``benchmarks/bench_kernels.py``).
"""

import os

from . import _kernels_py

if os.environ.get("JADCE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

smoothed_abs = _kernels_py.smoothed_abs
penalty = _kernels_py.penalty
soft_threshold = _impl.soft_threshold

__all__ = ["BACKEND", "smoothed_abs", "penalty", "soft_threshold"]
