"""Score model, canonical JSON format, and the timestep grid.

A :class:`Score` holds note lists per voice with rational onsets and
durations in beats.  :func:`quantize` projects it onto a fixed grid of
:class:`TimestepSlice` objects (attack set and continuation set per step),
which every encoding consumes.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import jsonschema

from .errors import MissingKeyWarning, SchemaError, TranspositionFold

PITCH_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
MODES = ("major", "minor")
DEFAULT_RESOLUTION = Fraction(1, 4)


@dataclass(frozen=True, order=True)
class KeyLabel:
    tonic_pc: int
    mode: str = "major"

    def __post_init__(self):
        if not 0 <= self.tonic_pc <= 11:
            raise ValueError(f"tonic_pc out of range: {self.tonic_pc}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode!r}")

    @property
    def camelot(self) -> tuple[int, str]:
        """Camelot wheel position: B major is 1B, C major 8B, A minor 8A."""
        major_pc = self.tonic_pc if self.mode == "major" else (self.tonic_pc + 3) % 12
        number = ((major_pc - 11) * 7) % 12 + 1
        return number, "B" if self.mode == "major" else "A"

    @property
    def camelot_label(self) -> str:
        n, letter = self.camelot
        return f"{n}{letter}"

    @property
    def name(self) -> str:
        return PITCH_NAMES[self.tonic_pc] + ("" if self.mode == "major" else "m")

    def transpose(self, semitones: int) -> "KeyLabel":
        return KeyLabel((self.tonic_pc + semitones) % 12, self.mode)

    def __str__(self):
        return self.name


C_MAJOR = KeyLabel(0, "major")


@dataclass(frozen=True)
class Note:
    onset: Fraction
    duration: Fraction
    pitch: int
    velocity: int = 64


@dataclass(frozen=True)
class Score:
    parts: tuple[tuple[Note, ...], ...]
    key: KeyLabel = C_MAJOR
    title: str = ""
    resolution: Fraction = DEFAULT_RESOLUTION

    def __post_init__(self):
        for v, voice in enumerate(self.parts):
            last = None
            for n, note in enumerate(voice):
                where = ("voices", v, n)
                if note.onset < 0:
                    raise SchemaError("negative onset", where)
                if note.duration <= 0:
                    raise SchemaError("duration must be positive", where)
                if not 0 <= note.pitch <= 127:
                    raise SchemaError(f"pitch {note.pitch} outside 0-127", where)
                if not 0 <= note.velocity <= 127:
                    raise SchemaError(f"velocity {note.velocity} outside 0-127", where)
                if last is not None and note.onset < last:
                    raise SchemaError("notes not sorted by onset", where)
                last = note.onset


@dataclass(frozen=True)
class TimestepSlice:
    attacks: frozenset = frozenset()
    continuations: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "attacks", frozenset(self.attacks))
        object.__setattr__(self, "continuations", frozenset(self.continuations))
        if self.attacks & self.continuations:
            raise ValueError("attack and continuation sets overlap")
        for p in self.attacks | self.continuations:
            if not 0 <= p <= 127:
                raise ValueError(f"pitch {p} outside 0-127")

    @property
    def pitches(self) -> frozenset:
        return self.attacks | self.continuations

    @property
    def is_empty(self) -> bool:
        return not self.attacks and not self.continuations


EMPTY_SLICE = TimestepSlice()


@dataclass(frozen=True)
class TimestepGrid:
    resolution: Fraction
    steps: tuple[TimestepSlice, ...]
    key: KeyLabel = C_MAJOR

    def __len__(self):
        return len(self.steps)

    def check(self) -> None:
        """Raise ValueError when a continuation has no predecessor."""
        for i in range(1, len(self.steps)):
            orphan = self.steps[i].continuations - self.steps[i - 1].pitches
            if orphan:
                raise ValueError(f"step {i}: continuation without predecessor {sorted(orphan)}")


@dataclass(frozen=True)
class Segment:
    piece_id: str
    start_step: int
    slices: tuple[TimestepSlice, ...]
    key: KeyLabel = C_MAJOR
    padded: bool = False

    def __len__(self):
        return len(self.slices)


# -- canonical JSON ---------------------------------------------------------

@lru_cache(maxsize=1)
def score_schema() -> dict:
    text = resources.files("tonalvae.data").joinpath("score.schema.json").read_text()
    return json.loads(text)


def _rational(value, path) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, int):
            return Fraction(value)
        # floats go through their shortest repr so 0.25 stays 1/4
        return Fraction(repr(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"not a rational number: {value!r}", path) from exc


def _format_rational(x: Fraction):
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_score_json(text: str) -> Score:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft7Validator(score_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, err.absolute_path)

    if "key" in doc:
        key = KeyLabel(doc["key"]["tonic_pc"], doc["key"]["mode"])
    else:
        warnings.warn("score has no key annotation; defaulting to C major", MissingKeyWarning, stacklevel=2)
        key = C_MAJOR
    resolution = _rational(doc.get("resolution", "1/4"), ("resolution",))
    if resolution <= 0:
        raise SchemaError("resolution must be positive", ("resolution",))

    parts = []
    for v, voice in enumerate(doc["voices"]):
        notes = []
        for n, (onset, dur, pitch, vel) in enumerate(voice):
            notes.append(Note(_rational(onset, ("voices", v, n, 0)),
                              _rational(dur, ("voices", v, n, 1)), pitch, vel))
        parts.append(tuple(notes))
    return Score(tuple(parts), key, doc.get("title", ""), resolution)


def serialize_score(score: Score) -> str:
    """Canonical JSON text, one note per line."""
    head = {
        "title": score.title,
        "key": {"tonic_pc": score.key.tonic_pc, "mode": score.key.mode},
        "resolution": _format_rational(score.resolution),
    }
    lines = ["{"] + [f" {json.dumps(k)}: {json.dumps(v)}," for k, v in head.items()] + [' "voices": [']
    for i, voice in enumerate(score.parts):
        notes = [json.dumps([_format_rational(n.onset), _format_rational(n.duration), n.pitch, n.velocity])
                 for n in voice]
        body = ",\n".join("   " + n for n in notes)
        tail = "," if i < len(score.parts) - 1 else ""
        lines.append("  [\n" + body + "\n  ]" + tail if notes else "  []" + tail)
    lines += [" ]", "}"]
    return "\n".join(lines) + "\n"


# -- grid operations --------------------------------------------------------

def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def quantize(score: Score, resolution: Fraction | None = None) -> TimestepGrid:
    """Project all voices onto one grid of attack/continuation pitch sets.

    Onsets and note ends are rounded half-up to the nearest step.  A note
    whose rounded end does not pass its rounded onset still gets its attack.
    """
    res = Fraction(resolution) if resolution is not None else score.resolution
    if res <= 0:
        raise ValueError("resolution must be positive")
    spans = []
    n_steps = 0
    for voice in score.parts:
        for note in voice:
            start = _round_half_up(note.onset / res)
            end = max(_round_half_up((note.onset + note.duration) / res), start + 1)
            spans.append((start, end, note.pitch))
            n_steps = max(n_steps, end)

    attacks = [set() for _ in range(n_steps)]
    conts = [set() for _ in range(n_steps)]
    for start, end, pitch in spans:
        attacks[start].add(pitch)
        for i in range(start + 1, end):
            conts[i].add(pitch)
    steps = tuple(TimestepSlice(a, c - a) for a, c in zip(attacks, conts))
    return TimestepGrid(res, steps, score.key)


def chordify_slices(slices: Iterable[TimestepSlice]) -> tuple[TimestepSlice, ...]:
    out = []
    for s in slices:
        if s.attacks and s.continuations:
            s = TimestepSlice(s.attacks | s.continuations, ())
        out.append(s)
    return tuple(out)


def chordify(grid: TimestepGrid) -> TimestepGrid:
    """Re-attack every held pitch at steps where some other pitch moves."""
    return replace(grid, steps=chordify_slices(grid.steps))


def fold_pitch(p: int) -> int:
    while p > 127:
        p -= 12
    while p < 0:
        p += 12
    return p


def transpose_slices(slices: Sequence[TimestepSlice], semitones: int) -> tuple[tuple[TimestepSlice, ...], bool]:
    """Shift every pitch; returns the new slices and whether any pitch folded."""
    folded = False

    def shift(pitches):
        nonlocal folded
        out = set()
        for p in pitches:
            q = p + semitones
            if not 0 <= q <= 127:
                q = fold_pitch(q)
                folded = True
            out.add(q)
        return out

    result = []
    for s in slices:
        a = shift(s.attacks)
        result.append(TimestepSlice(a, shift(s.continuations) - a))
    return tuple(result), folded


def transpose_grid(grid: TimestepGrid, semitones: int) -> TimestepGrid:
    if semitones == 0:
        return grid
    steps, folded = transpose_slices(grid.steps, semitones)
    if folded:
        warnings.warn(f"transposition by {semitones} folded pitches back by octaves",
                      TranspositionFold, stacklevel=2)
    return TimestepGrid(grid.resolution, steps, grid.key.transpose(semitones))


def transpose_segment(seg: Segment, semitones: int) -> Segment:
    slices, folded = transpose_slices(seg.slices, semitones)
    if folded:
        warnings.warn(f"transposition by {semitones} folded pitches back by octaves",
                      TranspositionFold, stacklevel=2)
    return replace(seg, slices=slices, key=seg.key.transpose(semitones))


def would_fold(slices: Iterable[TimestepSlice], semitones: int) -> bool:
    return any(not 0 <= p + semitones <= 127 for s in slices for p in s.pitches)


def segment(grid: TimestepGrid, length: int = 10, piece_id: str = "") -> list[Segment]:
    if length < 1:
        raise ValueError("segment length must be >= 1")
    out = []
    for start in range(0, len(grid.steps), length):
        chunk = grid.steps[start:start + length]
        padded = len(chunk) < length
        if padded:
            chunk = chunk + (EMPTY_SLICE,) * (length - len(chunk))
        out.append(Segment(piece_id, start, chunk, grid.key, padded))
    return out
