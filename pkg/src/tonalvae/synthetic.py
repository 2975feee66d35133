"""Deterministic four-voice chorale-style pieces for fixtures and demos.

Progressions walk a small diatonic transition table with a cadence every
eight beats.  Voices take the nearest chord tone in their range; the
soprano adds passing eighths and inner voices sometimes hold across beats.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .score import KeyLabel, Note, Score

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
HARMONIC_MINOR = (0, 2, 3, 5, 7, 8, 11)
RANGES = {"S": (60, 79), "A": (55, 72), "T": (48, 67), "B": (38, 57)}
NEXT_DEGREE = {
    0: (3, 4, 5, 1, 3),
    1: (4, 4, 6),
    2: (5, 3),
    3: (4, 0, 1),
    4: (0, 5, 0),
    5: (1, 3),
    6: (0,),
}


def _triad(scale, degree, tonic):
    return [(tonic + scale[(degree + k) % 7]) % 12 for k in (0, 2, 4)]


def _nearest(prev, pcs, lo, hi, below=None):
    options = [p for p in range(lo, hi + 1) if p % 12 in pcs and (below is None or p < below)]
    if not options:
        options = [p for p in range(lo, hi + 1) if p % 12 in pcs]
    return min(options, key=lambda p: (abs(p - prev), p))


def chorale(key: KeyLabel, n_beats: int = 48, seed: int = 0, title: str = "") -> Score:
    rng = np.random.default_rng(seed)
    scale = MAJOR_SCALE if key.mode == "major" else HARMONIC_MINOR
    degrees = [0]
    for beat in range(1, n_beats):
        if beat % 8 == 6:
            degrees.append(4)
        elif beat % 8 == 7 or beat == n_beats - 1:
            degrees.append(0)
        else:
            degrees.append(int(rng.choice(NEXT_DEGREE[degrees[-1]])))

    prev = {"S": 72, "A": 64, "T": 57, "B": 48}
    prev = {v: p + key.tonic_pc - (12 if key.tonic_pc > 6 else 0) for v, p in prev.items()}
    lines = {v: [] for v in "SATB"}
    for deg in degrees:
        pcs = _triad(scale, deg, key.tonic_pc)
        root = pcs[0]
        b = _nearest(prev["B"], {root}, *RANGES["B"])
        t = _nearest(prev["T"], set(pcs), max(RANGES["T"][0], b + 3), RANGES["T"][1])
        a = _nearest(prev["A"], set(pcs), max(RANGES["A"][0], t + 1), RANGES["A"][1])
        s = _nearest(prev["S"], set(pcs), max(RANGES["S"][0], a + 1), RANGES["S"][1])
        for v, p in zip("SATB", (s, a, t, b)):
            lines[v].append(p)
            prev[v] = p

    parts = []
    for v in "SATB":
        notes = []
        pitches = lines[v]
        beat = 0
        while beat < n_beats:
            p = pitches[beat]
            length = 1
            # inner voices and bass hold repeated pitches
            while (v != "S" and beat + length < n_beats and pitches[beat + length] == p
                   and rng.random() < 0.6):
                length += 1
            if beat + length >= n_beats:
                length = n_beats - beat
            nxt = pitches[beat + length] if beat + length < n_beats else None
            vel = int(rng.integers(60, 90))
            if (v == "S" and length == 1 and nxt is not None and 3 <= abs(nxt - p) <= 4
                    and rng.random() < 0.5):
                # passing eighth on a scale step between chord tones
                mid = [q for q in range(min(p, nxt) + 1, max(p, nxt))
                       if (q - key.tonic_pc) % 12 in scale]
                if mid:
                    notes.append(Note(Fraction(beat), Fraction(1, 2), p, vel))
                    notes.append(Note(Fraction(2 * beat + 1, 2), Fraction(1, 2), mid[0], vel))
                    beat += 1
                    continue
            notes.append(Note(Fraction(beat), Fraction(length), p, vel))
            beat += length
        parts.append(tuple(notes))
    return Score(tuple(parts), key, title)


def demo_corpus(n_pieces: int = 10, n_beats: int = 48, seed: int = 0) -> dict[str, Score]:
    """A mix of major and minor pieces on varied tonics."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(n_pieces):
        key = KeyLabel(int(rng.integers(0, 12)), "major" if i % 2 == 0 else "minor")
        name = f"chorale_{i:03d}"
        out[name] = chorale(key, n_beats, seed=seed * 1000 + i, title=f"Synthetic chorale {i} in {key}")
    return out
