"""Test-only helpers: a minimal SMF writer and random segment strategies."""

from __future__ import annotations

import struct

from hypothesis import strategies as st

from tonalvae.score import Segment, TimestepSlice
from tonalvae.smf import write_vlq

SHARPS = {0: 0, 7: 1, 2: 2, 9: 3, 4: 4, 11: 5, 6: 6, 1: 7, 5: -1, 10: -2, 3: -3, 8: -4}


def write_smf(score, division: int = 480, running_status: bool = False) -> bytes:
    """Format-1 file: a conductor track with the key signature, then one track per voice."""
    key = score.key
    tonic = key.tonic_pc if key.mode == "major" else (key.tonic_pc + 3) % 12
    meta = b"\x00\xff\x59\x02" + struct.pack(">bB", SHARPS[tonic], int(key.mode == "minor"))
    meta += b"\x00\xff\x51\x03\x07\xa1\x20\x00\xff\x2f\x00"
    tracks = [meta]
    for ch, part in enumerate(score.parts):
        events = []
        for n in part:
            on = int(n.onset * division)
            off = int((n.onset + n.duration) * division)
            events.append((off, 0, n.pitch, 0))
            events.append((on, 1, n.pitch, n.velocity))
        events.sort()
        body, now, last_status = b"", 0, None
        for tick, is_on, pitch, vel in events:
            status = (0x90 if is_on else 0x80) | (ch & 0x0F)
            body += write_vlq(tick - now)
            if not (running_status and status == last_status):
                body += bytes([status])
            body += bytes([pitch, vel if is_on else 64])
            now, last_status = tick, status
        tracks.append(body + b"\x00\xff\x2f\x00")
    out = b"MThd" + struct.pack(">IHHH", 6, 1, len(tracks), division)
    for t in tracks:
        out += b"MTrk" + struct.pack(">I", len(t)) + t
    return out


@st.composite
def slices(draw, lo: int = 0, hi: int = 127, max_size: int = 5):
    pitches = draw(st.sets(st.integers(lo, hi), max_size=max_size))
    attacks = draw(st.sets(st.sampled_from(sorted(pitches)), max_size=len(pitches))) if pitches else set()
    return TimestepSlice(frozenset(attacks), frozenset(pitches - attacks))


@st.composite
def segments(draw, length: int = 10, lo: int = 0, hi: int = 127, max_size: int = 5):
    """Random segments whose continuations are always held over from the previous slice."""
    out = []
    prev = frozenset()
    for _ in range(length):
        s = draw(slices(lo, hi, max_size))
        cont = frozenset(p for p in s.continuations if p in prev)
        attacks = s.attacks | (s.continuations - cont)
        s = TimestepSlice(attacks, cont)
        out.append(s)
        prev = s.pitches
    return Segment("h", 0, tuple(out))
