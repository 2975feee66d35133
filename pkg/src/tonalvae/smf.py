"""Standard MIDI File reader (formats 0 and 1).

Only note events and the first key-signature meta event are interpreted.
Everything else is skipped at the chunk/event level.
"""

from __future__ import annotations

import struct
import warnings
from fractions import Fraction

from .errors import MalformedFile, UnmatchedNoteOn
from .score import C_MAJOR, KeyLabel, Note, Score


def read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    """Decode a variable-length quantity; returns (value, new position)."""
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise MalformedFile("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MalformedFile("variable-length quantity longer than 4 bytes")


def write_vlq(value: int) -> bytes:
    if not 0 <= value <= 0x0FFFFFFF:
        raise ValueError("VLQ out of range")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def key_from_signature(sharps: int, minor: bool) -> KeyLabel:
    major_pc = (7 * sharps) % 12
    if minor:
        return KeyLabel((major_pc + 9) % 12, "minor")
    return KeyLabel(major_pc, "major")


def _chunks(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MalformedFile("truncated chunk header")
        kind = data[pos:pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + length]
        if len(body) != length:
            raise MalformedFile(f"chunk {kind!r} truncated")
        yield kind, body
        pos += 8 + length


def _parse_track(body: bytes, track_no: int):
    """Return (notes, key signature or None) for one MTrk chunk."""
    pos = 0
    tick = 0
    status = None
    open_notes: dict[int, list[tuple[int, int]]] = {}
    notes = []
    key = None
    while pos < len(body):
        delta, pos = read_vlq(body, pos)
        tick += delta
        if pos >= len(body):
            raise MalformedFile(f"track {track_no}: event missing after delta time")
        byte = body[pos]
        if byte == 0xFF:
            if pos + 2 > len(body):
                raise MalformedFile(f"track {track_no}: truncated meta event")
            meta = body[pos + 1]
            length, pos = read_vlq(body, pos + 2)
            payload = body[pos:pos + length]
            pos += length
            if meta == 0x59 and len(payload) >= 2 and key is None:
                sharps = struct.unpack("b", payload[:1])[0]
                key = key_from_signature(sharps, payload[1] == 1)
            elif meta == 0x2F:
                break
            continue
        if byte in (0xF0, 0xF7):
            length, pos = read_vlq(body, pos + 1)
            pos += length
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MalformedFile(f"track {track_no}: running status without a prior status byte")
        kind = status & 0xF0
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        args = body[pos:pos + n_data]
        if len(args) != n_data:
            raise MalformedFile(f"track {track_no}: truncated channel event")
        pos += n_data
        if kind == 0x90 and args[1] > 0:
            open_notes.setdefault(args[0], []).append((tick, args[1]))
        elif kind == 0x80 or (kind == 0x90 and args[1] == 0):
            stack = open_notes.get(args[0])
            if stack:
                # latest NOTE_ON is closed first
                start, vel = stack.pop()
                if tick > start:
                    notes.append((start, tick - start, args[0], vel))
    for pitch, stack in open_notes.items():
        for start, vel in stack:
            warnings.warn(f"track {track_no}: NOTE_ON {pitch} at tick {start} never closed",
                          UnmatchedNoteOn, stacklevel=3)
            if tick > start:
                notes.append((start, tick - start, pitch, vel))
    notes.sort(key=lambda n: (n[0], n[2]))
    return notes, key


def parse_smf(data: bytes, title: str = "") -> Score:
    chunks = _chunks(bytes(data))
    try:
        kind, header = next(chunks)
    except StopIteration:
        raise MalformedFile("empty file") from None
    if kind != b"MThd" or len(header) < 6:
        raise MalformedFile("missing MThd header")
    fmt, ntrks, division = struct.unpack(">HHH", header[:6])
    if fmt not in (0, 1):
        raise MalformedFile(f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise MalformedFile("SMPTE time division is not supported")
    if division == 0:
        raise MalformedFile("division is zero")

    voices = []
    key = None
    n_tracks = 0
    for i, (kind, body) in enumerate(chunks):
        if kind != b"MTrk":
            continue  # unknown chunks are allowed and skipped
        n_tracks += 1
        notes, track_key = _parse_track(body, i)
        if key is None:
            key = track_key
        if notes:
            voices.append(tuple(Note(Fraction(s, division), Fraction(d, division), p, v)
                                for s, d, p, v in notes))
    if n_tracks == 0:
        raise MalformedFile("no MTrk chunks")
    return Score(tuple(voices), key or C_MAJOR, title)
