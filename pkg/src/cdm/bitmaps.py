"""Plain-text portable bitmaps (PBM P1) and block-letter mask synthesis.

Binary phase masks are loaded from PBM files rather than hard-coded;
:func:`letter_mask` renders short strings into such a bitmap so the
letter-mask preset can generate its own input file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .states import Grid2D

__all__ = ["read_pbm", "write_pbm", "letter_mask"]

# 5x7 glyphs for the letters used by the presets ('.'=0, 'X'=1)
_GLYPHS = {
    "U": ["X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."],
    "R": ["XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"],
    "C": [".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."],
    "D": ["XXXX.", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXX."],
    "M": ["X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"],
}
_GLYPH_H, _GLYPH_W = 7, 5


def write_pbm(path: str | Path, bits: np.ndarray) -> None:
    """Write a boolean (H, W) image as a plain-text PBM (P1) file."""
    bits = np.asarray(bits).astype(np.uint8)
    if bits.ndim != 2:
        raise ValueError("PBM image must be 2-D")
    h, w = bits.shape
    lines = [f"P1", f"{w} {h}"]
    lines += [" ".join(str(int(v)) for v in row) for row in bits]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_pbm(path: str | Path) -> np.ndarray:
    """Read a plain-text PBM (P1) file into a boolean (H, W) array."""
    text = Path(path).read_text(encoding="ascii")
    tokens: list[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a plain PBM (P1) file")
    if len(tokens) < 3:
        raise ValueError(f"{path}: missing PBM dimensions")
    w, h = int(tokens[1]), int(tokens[2])
    digits = "".join(tokens[3:])
    if len(digits) < w * h or any(c not in "01" for c in digits):
        raise ValueError(f"{path}: bad PBM pixel data")
    data = np.frombuffer(digits[: w * h].encode("ascii"), dtype=np.uint8) - ord("0")
    return data.reshape(h, w).astype(bool)


def letter_mask(grid: Grid2D, text: str = "UR") -> np.ndarray:
    """Render block letters centered on the grid as a boolean (ny, nx) mask.

    Letters are upscaled from a 5x7 font to roughly 60% of the grid
    height. Only the glyphs needed by the presets are defined.
    """
    if not text:
        raise ValueError("need at least one letter")
    glyphs = []
    for ch in text.upper():
        if ch not in _GLYPHS:
            raise ValueError(f"no glyph for {ch!r} (have {sorted(_GLYPHS)})")
        glyphs.append(np.array([[c == "X" for c in row] for row in _GLYPHS[ch]]))
    gap = 1
    cells_w = len(glyphs) * _GLYPH_W + (len(glyphs) - 1) * gap
    scale = max(1, min(int(0.6 * grid.ny / _GLYPH_H), int(0.8 * grid.nx / cells_w)))
    canvas = np.zeros((grid.ny, grid.nx), dtype=bool)
    total_w = cells_w * scale
    total_h = _GLYPH_H * scale
    if total_w > grid.nx or total_h > grid.ny:
        raise ValueError(f"grid {grid.nx}x{grid.ny} too small for {text!r}")
    y0 = (grid.ny - total_h) // 2
    x0 = (grid.nx - total_w) // 2
    for k, glyph in enumerate(glyphs):
        big = np.kron(glyph, np.ones((scale, scale), dtype=bool))
        x = x0 + k * (_GLYPH_W + gap) * scale
        canvas[y0:y0 + total_h, x:x + _GLYPH_W * scale] = big
    return canvas
