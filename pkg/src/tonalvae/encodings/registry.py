"""Dispatch of encode/decode/augment by encoding id."""

from __future__ import annotations

from ..score import Segment, transpose_segment
from .abc import decode_abc, encode_abc
from .abc import vocabulary as abc_vocabulary
from .base import EncodedTensor, EncodingId, Vocabulary
from .midilike import augment_midi_like, decode_midi_like, encode_midi_like
from .midilike import vocabulary as midi_vocabulary
from .pianoroll import augment_piano_roll, decode_piano_roll, encode_piano_roll
from .tonnetz import decode_tonnetz, encode_tonnetz

# encodings whose transposition can be computed on the tensor directly
FAST_AUGMENT = frozenset({EncodingId.PIANO_ROLL, EncodingId.MIDI_LIKE,
                          EncodingId.PC_DFT, EncodingId.PITCH_DFT})


def encode(encoding_id, seg: Segment) -> EncodedTensor:
    from .. import spectral

    enc = EncodingId(encoding_id)
    return {
        EncodingId.PIANO_ROLL: encode_piano_roll,
        EncodingId.MIDI_LIKE: encode_midi_like,
        EncodingId.ABC: encode_abc,
        EncodingId.TONNETZ: encode_tonnetz,
        EncodingId.PC_DFT: spectral.encode_pc_dft,
        EncodingId.PITCH_DFT: spectral.encode_pitch_dft,
    }[enc](seg)


def decode(t: EncodedTensor, length: int = 10, threshold: float = 0.5) -> Segment:
    from .. import spectral

    enc = t.encoding_id
    if enc == EncodingId.MIDI_LIKE:
        return decode_midi_like(t, length)
    if enc == EncodingId.ABC:
        return decode_abc(t, length)
    return {
        EncodingId.PIANO_ROLL: decode_piano_roll,
        EncodingId.TONNETZ: decode_tonnetz,
        EncodingId.PC_DFT: spectral.decode_pc_dft,
        EncodingId.PITCH_DFT: spectral.decode_pitch_dft,
    }[enc](t, threshold)


def augment(t: EncodedTensor, semitones: int, length: int = 10) -> EncodedTensor:
    """Transpose an encoded segment.

    Abc and Tonnetz have no tensor-level shortcut; they are decoded,
    transposed, and encoded again.
    """
    from .. import spectral

    enc = t.encoding_id
    if enc == EncodingId.PIANO_ROLL:
        return augment_piano_roll(t, semitones)
    if enc == EncodingId.MIDI_LIKE:
        return augment_midi_like(t, semitones, length)
    if enc in (EncodingId.PC_DFT, EncodingId.PITCH_DFT):
        return spectral.rotate_phases(t, semitones)
    seg = decode(t, length)
    return encode(enc, transpose_segment(seg, semitones))


def vocabulary_for(encoding_id, length: int = 10) -> Vocabulary | None:
    enc = EncodingId(encoding_id)
    if enc == EncodingId.MIDI_LIKE:
        return midi_vocabulary(length)
    if enc == EncodingId.ABC:
        return abc_vocabulary(length)
    return None
