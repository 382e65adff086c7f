"""Matrix-free application of a bit-packed sensing matrix.

Wraps the kernel backend behind one object so solvers never touch the
packing. With the compiled backend the packed bits are used directly
(about 1 byte per 8 matrix entries); the numpy fallback unpacks once to
a dense float64 matrix kept for the operator's lifetime, trading memory
for BLAS speed.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .masks import SensingMatrix

__all__ = ["MaskOperator"]


class MaskOperator:
    """Applies Q and Q^T for a :class:`SensingMatrix` (Q is real binary)."""

    def __init__(self, matrix: SensingMatrix, backend: str | None = None):
        self.matrix = matrix
        self.m = matrix.m
        self.n = matrix.n
        self.backend = backend or _kernels.BACKEND
        if self.backend == "compiled":
            self._dense = None
        elif self.backend == "python":
            self._dense = matrix.to_dense().astype(np.float64)
        else:
            raise ValueError(f"unknown kernel backend {self.backend!r}")
        self._popcounts: np.ndarray | None = None

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Q @ x for a complex vector of length n."""
        x = np.ascontiguousarray(x, dtype=np.complex128)
        if self._dense is None:
            return _kernels.q_matvec(self.matrix.packed, self.n, x)
        return self._dense @ x.real + 1j * (self._dense @ x.imag)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Q^T @ y for a complex vector of length m (Q real, so adjoint = transpose)."""
        y = np.ascontiguousarray(y, dtype=np.complex128)
        if self._dense is None:
            return _kernels.qt_matvec(self.matrix.packed, self.n, y)
        return y.real @ self._dense + 1j * (y.imag @ self._dense)

    def gram_matvec(self, y: np.ndarray) -> np.ndarray:
        """(Q Q^T) @ y, used by the minimum-norm solver."""
        return self.matvec(self.rmatvec(y))

    def normal_matvec(self, x: np.ndarray) -> np.ndarray:
        """(Q^T Q) @ x, used by the TV solver's quadratic subproblem."""
        return self.rmatvec(self.matvec(x))

    def row_popcounts(self) -> np.ndarray:
        if self._popcounts is None:
            self._popcounts = _kernels.row_popcounts(self.matrix.packed, self.n)
        return self._popcounts

    def gram_trace(self) -> float:
        """trace(Q Q^T) = total number of ones in the matrix."""
        return float(self.row_popcounts().sum())
