"""Random binary sensing masks with a splittable, counter-based PRNG.

Mask bits must be bit-exact reproducible from ``(m, n, density, seed)``
alone, and any single row must be reconstructible in isolation. Bits are
therefore drawn from the Philox-4x64 counter-based generator with a fixed
keying scheme, documented here so fixtures are portable:

* key      = ``(seed, STREAM_MASKS)`` (two 64-bit words),
* counter  = ``(block, 0, 0, row)`` where ``block`` auto-increments and
  each 4-word block covers four consecutive columns,
* column ``j`` of a row consumes the ``j``-th raw 64-bit word ``w`` of
  that row's stream, is mapped to the uniform ``u = (w >> 11) * 2**-53``,
  and the bit is 1 iff ``u < density``.

Rows are stored bit-packed, little-endian bit order, zero-padded to the
byte boundary; this packed layout is also the on-disk format.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .states import Grid2D

__all__ = ["SensingMatrix", "generate_masks", "identity_masks", "masks_from_rows"]

log = logging.getLogger(__name__)

# Stream selectors: second key word keeps the mask bits, the photon
# counting draws and the raster-plan shuffles on disjoint Philox streams
# even when they share one user seed.
STREAM_MASKS = 0x6D61736B    # "mask"
STREAM_COUNTS = 0x636E7473   # "cnts"
STREAM_PLAN = 0x706C616E     # "plan"

_U53 = 2.0 ** -53


def row_stream(seed: int, row: int, stream: int = STREAM_MASKS) -> Philox:
    """Philox bit generator for one row, independent of all other rows."""
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    return Philox(key=[seed, stream], counter=[0, 0, 0, row])


def row_rng(seed: int, row: int, stream: int) -> Generator:
    """numpy Generator over :func:`row_stream` (for Poisson draws etc.)."""
    return Generator(row_stream(seed, row, stream))


def _row_bits(seed: int, row: int, n: int, density: float) -> np.ndarray:
    words = row_stream(seed, row).random_raw(n)
    u = (words >> np.uint64(11)).astype(np.float64) * _U53
    return u < density


@dataclass(frozen=True)
class SensingMatrix:
    """M x N binary mask matrix, rows bit-packed little-endian.

    ``packed`` has shape ``(m, ceil(n / 8))`` and dtype uint8; padding
    bits beyond column ``n - 1`` are zero. ``seed`` is ``None`` for
    matrices built from explicit rows rather than the PRNG.
    """

    packed: np.ndarray
    n: int
    density: float
    seed: int | None

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != (self.n + 7) // 8:
            raise ValueError(
                f"packed shape {packed.shape} inconsistent with n={self.n}")
        if packed.shape[0] < 1:
            raise ValueError("need at least one mask row")
        packed = packed.copy()
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)

    @property
    def m(self) -> int:
        return self.packed.shape[0]

    def row_bits(self, row: int) -> np.ndarray:
        """One row as a boolean vector of length n."""
        return np.unpackbits(self.packed[row], count=self.n, bitorder="little").astype(bool)

    def to_dense(self) -> np.ndarray:
        """All rows as a boolean (m, n) array."""
        return np.unpackbits(self.packed, axis=1, count=self.n,
                             bitorder="little").astype(bool)

    def row_popcounts(self) -> np.ndarray:
        """Number of ones per row (int64 vector of length m)."""
        return np.unpackbits(self.packed, axis=1, count=self.n,
                             bitorder="little").sum(axis=1, dtype=np.int64)

    def zero_rows(self) -> np.ndarray:
        """Indices of all-zero rows (they contribute no signal)."""
        return np.flatnonzero(self.row_popcounts() == 0)


def generate_masks(m: int, grid: Grid2D, density: float, seed: int) -> SensingMatrix:
    """Draw an M x N sensing matrix with i.i.d. Bernoulli(density) entries.

    Each entry is 1 with probability ``density``, drawn from the
    documented per-row Philox streams, so the same arguments always
    reproduce the same bits and any row can be regenerated alone.
    All-zero rows are kept (the recovery stage tolerates them) but
    reported through a log warning.
    """
    if m < 1:
        raise ValueError(f"need m >= 1 mask rows, got {m}")
    if not 0.0 < density < 1.0:
        raise ValueError(f"density must be in (0, 1), got {density}")
    n = grid.n
    bits = np.empty((m, n), dtype=bool)
    for row in range(m):
        bits[row] = _row_bits(seed, row, n, density)
    packed = np.packbits(bits, axis=1, bitorder="little")
    matrix = SensingMatrix(packed, n=n, density=density, seed=seed)
    dead = matrix.zero_rows()
    if dead.size:
        log.warning("sensing matrix (seed=%d) has %d all-zero row(s): %s",
                    seed, dead.size, dead.tolist())
    return matrix


def masks_from_rows(rows: np.ndarray, seed: int | None = None) -> SensingMatrix:
    """Build a :class:`SensingMatrix` from an explicit boolean (m, n) array."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D boolean array")
    rows = rows.astype(bool)
    packed = np.packbits(rows, axis=1, bitorder="little")
    density = float(rows.mean()) if rows.size else 0.0
    return SensingMatrix(packed, n=rows.shape[1], density=density, seed=seed)


def identity_masks(grid: Grid2D, pixels: np.ndarray | None = None) -> SensingMatrix:
    """Single-pixel mask rows (one row per pixel, or per listed pixel).

    These are the raster-scan masks: row k has a single 1 at pixel
    ``pixels[k]`` (default: every pixel in index order).
    """
    n = grid.n
    if pixels is None:
        pixels = np.arange(n)
    pixels = np.asarray(pixels, dtype=np.int64)
    if pixels.size == 0:
        raise ValueError("need at least one pixel")
    if pixels.min() < 0 or pixels.max() >= n:
        raise ValueError("pixel index out of range")
    nbytes = (n + 7) // 8
    packed = np.zeros((pixels.size, nbytes), dtype=np.uint8)
    rows = np.arange(pixels.size)
    packed[rows, pixels // 8] = np.uint8(1) << (pixels % 8).astype(np.uint8)
    return SensingMatrix(packed, n=n, density=1.0 / n, seed=None)
