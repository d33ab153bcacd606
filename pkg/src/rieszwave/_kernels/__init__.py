"""Pairwise-sum kernels with a compiled fast path.

Imports the Cython extension when it built successfully, otherwise the
numpy fallback.  Set ``RIESZWAVE_NO_EXT=1`` to force the fallback (useful
for benchmarking and for verifying the two backends agree).
"""
import os

from . import _fallback

if os.environ.get("RIESZWAVE_NO_EXT"):
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

riesz_double_sum = _impl.riesz_double_sum
gagliardo_double_sum = _impl.gagliardo_double_sum
holder_max_ratio = _impl.holder_max_ratio

__all__ = [
    "BACKEND",
    "riesz_double_sum",
    "gagliardo_double_sum",
    "holder_max_ratio",
]
