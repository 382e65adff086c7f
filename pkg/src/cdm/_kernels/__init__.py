"""Backend selection for the bit-packed mask kernels.

The compiled extension is preferred when importable; setting the
environment variable ``CDM_PURE_PYTHON=1`` forces the numpy fallback
(useful for benchmarking and debugging). ``BACKEND`` names the active
implementation.
"""

from __future__ import annotations

import os

_impl = None
BACKEND = "python"

if os.environ.get("CDM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _bitops as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = None

if _impl is None:
    from . import _bitops_py as _impl

q_matvec = _impl.q_matvec
qt_matvec = _impl.qt_matvec
row_popcounts = _impl.row_popcounts

__all__ = ["q_matvec", "qt_matvec", "row_popcounts", "BACKEND"]
