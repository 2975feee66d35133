"""MIDI-like event tokens: NOTE_ON, NOTE_OFF, SET_VELOCITY, TIME_SHIFT.

Events inside one step are emitted in a fixed order: NOTE_OFFs for pitches
that stop sounding, SET_VELOCITY when the bin changes, NOTE_ONs in
ascending pitch, then a TIME_SHIFT (consecutive shifts are merged).

Pitches already sounding when the segment starts are written as NOTE_ONs
before the first SET_VELOCITY or TIME_SHIFT token; the decoder reads those
as continuations of step 0.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np

from ..errors import InvalidEvent
from ..score import Segment, TimestepSlice, fold_pitch
from .base import EncodedTensor, EncodingId, Vocabulary, check_encoding, packaged_vocabulary

N_VELOCITY_BINS = 32
VELOCITY_BIN_WIDTH = 4
DEFAULT_VELOCITY = 64
DEFAULT_SEGMENT_LENGTH = 10


def velocity_bin(velocity: int) -> int:
    return min(max(velocity, 0) // VELOCITY_BIN_WIDTH, N_VELOCITY_BINS - 1)


def build_vocabulary(max_shift: int = DEFAULT_SEGMENT_LENGTH) -> Vocabulary:
    tokens = [f"NOTE_ON_{p}" for p in range(128)]
    tokens += [f"NOTE_OFF_{p}" for p in range(128)]
    tokens += [f"SET_VELOCITY_{b}" for b in range(N_VELOCITY_BINS)]
    tokens += [f"TIME_SHIFT_{k}" for k in range(1, max_shift + 1)]
    return Vocabulary(EncodingId.MIDI_LIKE, tokens)


@lru_cache(maxsize=None)
def vocabulary(segment_length: int = DEFAULT_SEGMENT_LENGTH) -> Vocabulary:
    if segment_length == DEFAULT_SEGMENT_LENGTH:
        return packaged_vocabulary(EncodingId.MIDI_LIKE, "midi_like.vocab")
    return build_vocabulary(segment_length)


def midi_like_tokens(seg: Segment, velocity: int = DEFAULT_VELOCITY) -> list[str]:
    tokens: list[str] = []
    vel = velocity_bin(velocity)
    current_vel = None
    prev: frozenset = frozenset()

    def shift():
        if tokens and tokens[-1].startswith("TIME_SHIFT_"):
            tokens[-1] = f"TIME_SHIFT_{int(tokens[-1][11:]) + 1}"
        else:
            tokens.append("TIME_SHIFT_1")

    for i, s in enumerate(seg.slices):
        if i == 0:
            tokens += [f"NOTE_ON_{p}" for p in sorted(s.continuations)]
        else:
            tokens += [f"NOTE_OFF_{p}" for p in sorted(prev - s.continuations)]
        if s.attacks:
            if current_vel != vel:
                tokens.append(f"SET_VELOCITY_{vel}")
                current_vel = vel
            tokens += [f"NOTE_ON_{p}" for p in sorted(s.attacks)]
        shift()
        prev = s.pitches
    return tokens


def encode_midi_like(seg: Segment, velocity: int = DEFAULT_VELOCITY) -> EncodedTensor:
    vocab = vocabulary(max(len(seg.slices), 1))
    ids = vocab.encode(midi_like_tokens(seg, velocity))
    return EncodedTensor(EncodingId.MIDI_LIKE, ids.reshape(-1, 1))


def replay_midi_like(tokens, length: int = DEFAULT_SEGMENT_LENGTH) -> tuple[TimestepSlice, ...]:
    """Replay an event stream onto ``length`` slices.  Never raises."""
    attacks = [set() for _ in range(length)]
    conts = [set() for _ in range(length)]
    active: set[int] = set()
    step = 0
    preamble = True
    for tok in tokens:
        kind, _, arg = tok.rpartition("_")
        try:
            value = int(arg)
        except ValueError:
            if tok != "<pad>":
                warnings.warn(f"unknown token {tok!r} ignored", InvalidEvent, stacklevel=2)
            continue
        if kind == "NOTE_ON" and 0 <= value <= 127:
            if step >= length:
                warnings.warn(f"NOTE_ON_{value} past segment end ignored", InvalidEvent, stacklevel=2)
                continue
            if preamble:
                conts[0].add(value)
            else:
                attacks[step].add(value)
                conts[step].discard(value)
            active.add(value)
        elif kind == "NOTE_OFF" and 0 <= value <= 127:
            preamble = False
            if value not in active:
                warnings.warn(f"NOTE_OFF_{value} without an active note", InvalidEvent, stacklevel=2)
                continue
            active.discard(value)
            if step < length:
                conts[step].discard(value)
        elif kind == "SET_VELOCITY":
            preamble = False
        elif kind == "TIME_SHIFT" and value >= 1:
            preamble = False
            for _ in range(value):
                step += 1
                if step < length:
                    conts[step] = set(active) - attacks[step]
        else:
            warnings.warn(f"unknown token {tok!r} ignored", InvalidEvent, stacklevel=2)
    for j in range(step + 1, length):
        conts[j] = set(active)
    return tuple(TimestepSlice(a, c - a) for a, c in zip(attacks, conts))


def decode_midi_like(t: EncodedTensor, length: int = DEFAULT_SEGMENT_LENGTH) -> Segment:
    check_encoding(t, EncodingId.MIDI_LIKE)
    tokens = vocabulary(length).decode(t.values)
    return Segment("", 0, replay_midi_like(tokens, length))


@lru_cache(maxsize=None)
def _shift_table(vocab_size: int, semitones: int) -> np.ndarray:
    table = np.arange(vocab_size, dtype=np.int32)
    on0, off0 = 2, 2 + 128
    for p in range(128):
        q = fold_pitch(p + semitones)
        table[on0 + p] = on0 + q
        table[off0 + p] = off0 + q
    return table


def augment_midi_like(t: EncodedTensor, semitones: int, length: int = DEFAULT_SEGMENT_LENGTH) -> EncodedTensor:
    check_encoding(t, EncodingId.MIDI_LIKE)
    vocab = vocabulary(length)
    ids = np.asarray(t.values, dtype=np.int32)
    if ids.size and (ids.min() < 0 or ids.max() >= len(vocab)):
        ids = np.where((ids >= 0) & (ids < len(vocab)), ids, 1)
    return EncodedTensor(EncodingId.MIDI_LIKE, _shift_table(len(vocab), semitones)[ids])
