"""Piano roll with separate attack and continuation halves (256 columns)."""

import numpy as np

from ..score import Segment, TimestepSlice
from .base import EncodedTensor, EncodingId, check_encoding

WIDTH = 256
CONT_OFFSET = 128


def encode_piano_roll(seg: Segment) -> EncodedTensor:
    out = np.zeros((len(seg.slices), WIDTH), dtype=np.uint8)
    for i, s in enumerate(seg.slices):
        out[i, sorted(s.attacks)] = 1
        out[i, [CONT_OFFSET + p for p in sorted(s.continuations)]] = 1
    return EncodedTensor(EncodingId.PIANO_ROLL, out)


def decode_piano_roll(t: EncodedTensor, threshold: float = 0.5) -> Segment:
    check_encoding(t, EncodingId.PIANO_ROLL, WIDTH)
    on = np.asarray(t.values, dtype=float) >= threshold
    slices = []
    for row in on:
        attacks = set(np.flatnonzero(row[:CONT_OFFSET]).tolist())
        conts = set(np.flatnonzero(row[CONT_OFFSET:]).tolist()) - attacks
        slices.append(TimestepSlice(attacks, conts))
    return Segment("", 0, tuple(slices))


def augment_piano_roll(t: EncodedTensor, semitones: int) -> EncodedTensor:
    """Rotate attack and continuation halves independently.

    Rotation wraps around the 128-pitch range, so it only agrees with
    :func:`tonalvae.score.transpose_grid` when no pitch leaves 0-127.
    """
    check_encoding(t, EncodingId.PIANO_ROLL, WIDTH)
    v = t.values
    out = np.concatenate([np.roll(v[:, :CONT_OFFSET], semitones, axis=1),
                          np.roll(v[:, CONT_OFFSET:], semitones, axis=1)], axis=1)
    return EncodedTensor(EncodingId.PIANO_ROLL, out)
