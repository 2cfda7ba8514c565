"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set PROBFP_PURE=1 to force the pure-Python kernels regardless of what
was compiled (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("PROBFP_PURE") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND
round_array = _impl.round_array
eval_program = _impl.eval_program


def relative_errors(x: np.ndarray, p: int, e_min: int, e_max: int) -> np.ndarray:
    """(x - round(x))/x elementwise; x must be nonzero."""
    z = round_array(np.asarray(x, dtype=np.float64), p, e_min, e_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (np.asarray(x, dtype=np.float64) - z) / np.asarray(x, dtype=np.float64)
