"""Chordified ABC text, one token per lexical unit.

A segment becomes a list of runs.  Each run is a rest ``z``, a single note
such as ``^F,`` or a bracketed chord ``[ CEG ]``, followed by its length in
steps.  A ``-`` before a run marks it as tied from the preceding material,
so its first step holds continuations instead of attacks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ParseError
from ..score import Segment, TimestepSlice
from .base import PAD, EncodedTensor, EncodingId, Vocabulary, check_encoding, packaged_vocabulary

_LETTERS = ("C", "^C", "D", "^D", "E", "F", "^F", "G", "^G", "A", "^A", "B")
DEFAULT_SEGMENT_LENGTH = 10


def abc_pitch(p: int) -> str:
    if not 0 <= p <= 127:
        raise ValueError(f"pitch {p} outside 0-127")
    name = _LETTERS[p % 12]
    octave = p // 12 - 1
    if octave >= 5:
        return name.lower() + "'" * (octave - 5)
    return name + "," * (4 - octave)


PITCH_OF = {abc_pitch(p): p for p in range(128)}


def build_vocabulary(max_duration: int = DEFAULT_SEGMENT_LENGTH) -> Vocabulary:
    tokens = ["[", "]", "z", "-"] + [abc_pitch(p) for p in range(128)]
    tokens += [str(d) for d in range(1, max_duration + 1)]
    return Vocabulary(EncodingId.ABC, tokens)


@lru_cache(maxsize=None)
def vocabulary(segment_length: int = DEFAULT_SEGMENT_LENGTH) -> Vocabulary:
    if segment_length == DEFAULT_SEGMENT_LENGTH:
        return packaged_vocabulary(EncodingId.ABC, "abc.vocab")
    return build_vocabulary(segment_length)


def _runs(slices):
    runs = []  # [tied, pitches, length]
    prev = None
    for s in slices:
        content = s.pitches
        if s.attacks:
            runs.append([False, content, 1])
        elif runs and content == prev and (content or not runs[-1][1]):
            runs[-1][2] += 1
        else:
            runs.append([bool(content), content, 1])
        prev = content
    return runs


def abc_tokens(seg: Segment) -> list[str]:
    tokens = []
    for tied, pitches, length in _runs(seg.slices):
        if tied:
            tokens.append("-")
        if not pitches:
            tokens.append("z")
        elif len(pitches) == 1:
            tokens.append(abc_pitch(next(iter(pitches))))
        else:
            tokens += ["["] + [abc_pitch(p) for p in sorted(pitches)] + ["]"]
        tokens.append(str(length))
    return tokens


def abc_text(tokens) -> str:
    """Join tokens into readable ABC, e.g. ``[CEG]2 -[CE]1 z1``."""
    out, word = [], ""
    for tok in tokens:
        if tok == PAD:
            continue
        word += tok
        if tok.isdigit():
            out.append(word)
            word = ""
    if word:
        out.append(word)
    return " ".join(out)


def encode_abc(seg: Segment) -> EncodedTensor:
    vocab = vocabulary(max(len(seg.slices), 1))
    return EncodedTensor(EncodingId.ABC, vocab.encode(abc_tokens(seg)).reshape(-1, 1))


def parse_abc_tokens(tokens, length: int = DEFAULT_SEGMENT_LENGTH) -> tuple[TimestepSlice, ...]:
    slices: list[TimestepSlice] = []
    tied = False
    chord = None  # pitches of the run being read
    in_bracket = False
    for pos, tok in enumerate(tokens):
        if tok == PAD:
            continue
        if in_bracket:
            if tok == "]":
                if not chord:
                    raise ParseError(f"token {pos}: empty chord")
                in_bracket = False
            elif tok in PITCH_OF:
                chord.add(PITCH_OF[tok])
            else:
                raise ParseError(f"token {pos}: {tok!r} inside chord")
            continue
        if tok.isdigit():
            if chord is None:
                raise ParseError(f"token {pos}: duration without a note")
            n = int(tok)
            if n < 1:
                raise ParseError(f"token {pos}: zero duration")
            for k in range(n):
                if tied or k > 0:
                    slices.append(TimestepSlice((), chord))
                else:
                    slices.append(TimestepSlice(chord, ()))
            chord, tied = None, False
        elif chord is not None:
            raise ParseError(f"token {pos}: {tok!r} where a duration was expected")
        elif tok == "-":
            tied = True
        elif tok == "z":
            chord = frozenset()
        elif tok == "[":
            chord, in_bracket = set(), True
        elif tok in PITCH_OF:
            chord = {PITCH_OF[tok]}
        else:
            raise ParseError(f"token {pos}: unknown token {tok!r}")
    if in_bracket:
        raise ParseError("unterminated chord bracket")
    if chord is not None:
        raise ParseError("final run has no duration")
    slices = slices[:length]
    slices += [TimestepSlice()] * (length - len(slices))
    return tuple(slices)


def decode_abc(t: EncodedTensor, length: int = DEFAULT_SEGMENT_LENGTH) -> Segment:
    check_encoding(t, EncodingId.ABC)
    tokens = vocabulary(length).decode(np.asarray(t.values))
    return Segment("", 0, parse_abc_tokens(tokens, length))
