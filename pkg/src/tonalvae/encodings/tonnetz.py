"""Extended Tonnetz: a 24x12 pitch lattice, doubled for attacks/continuations.

Each row runs in perfect fifths from its centre column (column 6); the octave
of every cell is the one nearest the row's centre pitch.  Successive row
centres descend by a major third then a minor third, alternately, so any
two adjacent rows hold major and minor triads as triangles.  Most pitches
occur in several cells and all of them are switched on together.
"""

from __future__ import annotations

import warnings
from functools import lru_cache
from importlib import resources

import numpy as np

from ..errors import OutOfRange, TranspositionFold
from ..score import Segment, TimestepSlice
from .base import EncodedTensor, EncodingId, check_encoding

ROWS, COLS = 24, 12
CENTER_COL = 6
TOP_CENTER = 105  # A7; the bottom row is centred on C1
WIDTH = ROWS * 2 * COLS


def build_tonnetz_table() -> np.ndarray:
    table = np.zeros((ROWS, COLS), dtype=np.int64)
    center = TOP_CENTER
    for r in range(ROWS):
        for c in range(COLS):
            pc = (center + 7 * (c - CENTER_COL)) % 12
            offset = (pc - center) % 12
            if offset > 5:
                offset -= 12
            table[r, c] = center + offset
        center -= 4 if r % 2 == 0 else 3
    return table


@lru_cache(maxsize=1)
def tonnetz_table() -> np.ndarray:
    """Committed cell -> MIDI pitch table (24 rows x 12 columns)."""
    text = resources.files("tonalvae.data").joinpath("tonnetz_table.csv").read_text()
    table = np.array([[int(x) for x in line.split(",")] for line in text.split()], dtype=np.int64)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=1)
def _positions() -> dict[int, frozenset]:
    out: dict[int, set] = {}
    for (r, c), p in np.ndenumerate(tonnetz_table()):
        out.setdefault(int(p), set()).add((r, c))
    return {p: frozenset(cells) for p, cells in out.items()}


def covered_range() -> tuple[int, int]:
    t = tonnetz_table()
    return int(t.min()), int(t.max())


def tonnetz_positions(pitch: int) -> frozenset:
    if not 0 <= pitch <= 127:
        raise OutOfRange(f"pitch {pitch} outside 0-127")
    return _positions().get(pitch, frozenset())


def _in_lattice(p: int) -> int:
    lo, hi = covered_range()
    q = p
    while q < lo:
        q += 12
    while q > hi:
        q -= 12
    if q != p:
        warnings.warn(f"pitch {p} outside the Tonnetz range, folded to {q}", TranspositionFold, stacklevel=3)
    return q


def encode_tonnetz(seg: Segment) -> EncodedTensor:
    out = np.zeros((len(seg.slices), ROWS, 2 * COLS), dtype=np.uint8)
    for i, s in enumerate(seg.slices):
        for half, pitches in ((0, s.attacks), (COLS, s.continuations)):
            for p in pitches:
                for r, c in tonnetz_positions(_in_lattice(p)):
                    out[i, r, half + c] = 1
    return EncodedTensor(EncodingId.TONNETZ, out.reshape(len(seg.slices), WIDTH))


def decode_tonnetz(t: EncodedTensor, threshold: float = 0.5, majority: bool = False) -> Segment:
    """Recover pitch p when all of its cells are on (or most, with ``majority``)."""
    check_encoding(t, EncodingId.TONNETZ, WIDTH)
    planes = np.asarray(t.values, dtype=float).reshape(-1, ROWS, 2 * COLS) >= threshold
    positions = _positions()
    slices = []
    for plane in planes:
        halves = []
        for half in (0, COLS):
            found = set()
            for p, cells in positions.items():
                hits = sum(plane[r, half + c] for r, c in cells)
                if hits == len(cells) or (majority and 2 * hits > len(cells)):
                    found.add(p)
            halves.append(found)
        slices.append(TimestepSlice(halves[0], halves[1] - halves[0]))
    return Segment("", 0, tuple(slices))
