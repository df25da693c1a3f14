"""Hot-kernel dispatch.

The numba backend is used when available; set MIXEDTRAFFIC_NUMBA=0 to force
the pure-numpy fallback, or MIXEDTRAFFIC_NUMBA=1 to fail hard if numba is
unusable. Both backends are bit-identical (see tests/test_kernels.py) and
``benchmarks/bench_kernels.py`` compares their throughput.
"""
from __future__ import annotations

import os

import numpy as np

from . import numpy_impl

_flag = os.environ.get("MIXEDTRAFFIC_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "false", "no"):
    _impl = numpy_impl
else:
    try:
        from . import numba_impl as _impl
    except ImportError:
        if _flag in ("1", "on", "true", "yes", "require"):
            raise
        _impl = numpy_impl

BACKEND = _impl.BACKEND
idm_accel = _impl.idm_accel
failsafe_bound = _impl.failsafe_bound
draw_polyline = _impl.draw_polyline
draw_rect = _impl.draw_rect
apply_circle_mask = _impl.apply_circle_mask


def warmup() -> None:
    """Trigger JIT compilation outside timed sections."""
    v = np.array([1.0, 2.0])
    g = np.array([10.0, np.inf])
    idm_accel(v, g, v, v + 29.0, 1.0, 1.0, 1.5, 2.0, 4.0)
    failsafe_bound(v, g, v, 0.1, 4.5)
    img = np.zeros((84, 84), dtype=np.uint8)
    draw_polyline(img, np.array([0.0, 5.0]), np.array([0.0, 0.0]), 1.6, 85, 0.0, 0.0, 0.5)
    draw_rect(img, 0.0, 0.0, 1.0, 0.0, 2.5, 0.9, 170, 0.0, 0.0, 0.5)
    apply_circle_mask(img, 10.0, 0.5, 0)
