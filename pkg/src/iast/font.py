"""Synthetic 5x7 dash-pattern glyphs for A-Z and 0-9.

Each character is a horizontal dash pattern: a subset of the six rows
sitting 2..7 cells above the baseline, drawn across the three interior
columns of the glyph. The two edge columns carry no ink, so every
character transition passes through near-empty columns. Row 7 (the
bottom row) is a solid full-width baseline bar shared by every glyph.

The recognizer reduces sampled features by averaging over the grid
height, so a character must be identifiable from single-column
statistics. A dash pattern is constant across its columns, and the
heights of its dashes above the continuous baseline are recoverable per
column from distance-to-baseline band features, independent of the
ribbon's rotation or curvature. Codes are row subsets of weight 2-4
chosen greedily for maximal pairwise set distance.
"""

from __future__ import annotations

import numpy as np

GLYPH_COLS = 5
GLYPH_ROWS = 8  # 7 pattern rows plus the solid baseline row

# rows (in cells above the baseline) carrying a dash, per character
_CODES = {
    "A": (2, 3), "B": (4, 5, 6, 7), "C": (2, 4, 5), "D": (2, 6, 7),
    "E": (3, 4, 6), "F": (3, 5, 7), "G": (4, 7), "H": (5, 6),
    "I": (2, 4, 6), "J": (2, 5, 7), "K": (3, 4, 5), "L": (3, 6, 7),
    "M": (2, 3, 4, 7), "N": (2, 3, 5, 6), "O": (2, 4), "P": (2, 5),
    "Q": (2, 6), "R": (2, 7), "S": (3, 4), "T": (3, 5),
    "U": (3, 6), "V": (3, 7), "W": (4, 5), "X": (4, 6),
    "Y": (5, 7), "Z": (6, 7), "0": (2, 3, 4), "1": (2, 3, 5),
    "2": (2, 3, 6), "3": (2, 3, 7), "4": (2, 4, 7), "5": (2, 5, 6),
    "6": (3, 4, 7), "7": (3, 5, 6), "8": (4, 5, 6), "9": (4, 5, 7),
}


def glyph_bitmap(ch: str) -> np.ndarray:
    """(8, 5) float bitmap: interior-column dashes over a baseline row."""
    rows = _CODES[ch]
    bm = np.zeros((GLYPH_ROWS, GLYPH_COLS))
    for r in rows:
        bm[GLYPH_ROWS - 1 - r, 1:4] = 1.0
    bm[GLYPH_ROWS - 1] = 1.0  # baseline
    return bm
