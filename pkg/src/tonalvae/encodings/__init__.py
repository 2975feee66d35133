"""Symbolic codecs mapping :class:`~tonalvae.score.Segment` to tensors.

``encode``/``decode``/``augment`` dispatch on :class:`EncodingId` and cover
all six encodings, including the two spectral ones from
:mod:`tonalvae.spectral`.
"""

from .abc import decode_abc, encode_abc
from .base import EncodedTensor, EncodingId, Kind, KIND_OF, Vocabulary
from .midilike import augment_midi_like, decode_midi_like, encode_midi_like
from .pianoroll import augment_piano_roll, decode_piano_roll, encode_piano_roll
from .tonnetz import decode_tonnetz, encode_tonnetz, tonnetz_positions, tonnetz_table
from .registry import FAST_AUGMENT, augment, decode, encode, vocabulary_for

__all__ = [
    "EncodedTensor", "EncodingId", "Kind", "KIND_OF", "Vocabulary",
    "encode_piano_roll", "decode_piano_roll", "augment_piano_roll",
    "encode_midi_like", "decode_midi_like", "augment_midi_like",
    "encode_abc", "decode_abc",
    "encode_tonnetz", "decode_tonnetz", "tonnetz_positions", "tonnetz_table",
    "encode", "decode", "augment", "vocabulary_for", "FAST_AUGMENT",
]
