"""Pure-numpy fallback for the bit-packed mask kernels.

Unpacks rows to a dense boolean matrix per call, so it is markedly
slower (and hungrier) than the compiled extension at large n; the
solver layer caches the unpacked matrix instead of calling these in a
loop. Results match the compiled kernels to floating-point roundoff.
"""

from __future__ import annotations

import numpy as np


def _unpack(packed: np.ndarray, n: int) -> np.ndarray:
    return np.unpackbits(packed, axis=1, count=n, bitorder="little")


def q_matvec(packed: np.ndarray, n: int, x: np.ndarray) -> np.ndarray:
    dense = _unpack(packed, n).astype(np.float64)
    x = np.asarray(x, dtype=np.complex128)
    return dense @ x.real + 1j * (dense @ x.imag)


def qt_matvec(packed: np.ndarray, n: int, y: np.ndarray) -> np.ndarray:
    dense = _unpack(packed, n).astype(np.float64)
    y = np.asarray(y, dtype=np.complex128)
    return y.real @ dense + 1j * (y.imag @ dense)


def row_popcounts(packed: np.ndarray, n: int) -> np.ndarray:
    return _unpack(packed, n).sum(axis=1, dtype=np.int64)
