import struct
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from helpers import write_smf
from tonalvae.errors import MalformedFile, UnmatchedNoteOn
from tonalvae.score import KeyLabel, parse_score_json
from tonalvae.smf import key_from_signature, parse_smf, read_vlq, write_vlq

from conftest import FIXTURES


def smf(*tracks, fmt=1, division=480):
    out = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    for t in tracks:
        out += b"MTrk" + struct.pack(">I", len(t)) + t
    return out


END = b"\x00\xff\x2f\x00"


@pytest.mark.parametrize("value,raw", [
    (0, b"\x00"), (0x7F, b"\x7f"), (0x80, b"\x81\x00"), (0x2000, b"\xc0\x00"),
    (0x3FFF, b"\xff\x7f"), (0x0FFFFFFF, b"\xff\xff\xff\x7f"),
])
def test_vlq_known_values(value, raw):
    assert write_vlq(value) == raw
    assert read_vlq(raw, 0) == (value, len(raw))


@given(st.integers(0, 0x0FFFFFFF))
def test_vlq_round_trip(v):
    raw = write_vlq(v)
    assert read_vlq(raw + b"\x55", 0) == (v, len(raw))


def test_vlq_truncated():
    with pytest.raises(MalformedFile):
        read_vlq(b"\x81", 0)


def test_single_quarter_note():
    score = parse_smf(smf(b"\x00\x90\x3c\x40" + b"\x83\x60\x80\x3c\x40" + END, fmt=0))
    assert len(score.parts) == 1
    (note,) = score.parts[0]
    assert (note.onset, note.duration, note.pitch, note.velocity) == (0, 1, 60, 64)


def test_note_on_velocity_zero_is_off_and_running_status():
    body = b"\x00\x90\x3c\x50" + b"\x83\x60\x3c\x00" + b"\x00\x3e\x50" + b"\x83\x60\x3e\x00" + END
    score = parse_smf(smf(body))
    assert [(n.onset, n.pitch) for n in score.parts[0]] == [(0, 60), (1, 62)]


def test_overlapping_same_pitch_pairs_last_on_first_off():
    # on@0, on@240, off@480, off@960: the inner off closes the later note
    body = (b"\x00\x90\x3c\x40" + b"\x81\x70\x90\x3c\x41" + b"\x81\x70\x80\x3c\x40"
            + b"\x83\x60\x80\x3c\x40" + END)
    notes = sorted(parse_smf(smf(body)).parts[0], key=lambda n: n.onset)
    assert [(n.onset, n.duration, n.velocity) for n in notes] == [
        (0, 2, 64), (Fraction(1, 2), Fraction(1, 2), 65)]


def test_dangling_note_closed_at_track_end():
    body = b"\x00\x90\x3c\x40" + b"\x87\x40\xff\x2f\x00"
    with pytest.warns(UnmatchedNoteOn):
        score = parse_smf(smf(body))
    assert score.parts[0][0].duration == 2


def test_meta_and_sysex_skipped_key_signature_read():
    body = (b"\x00\xff\x51\x03\x07\xa1\x20" + b"\x00\xf0\x03\x01\x02\xf7" + b"\x00\xff\x59\x02\x01\x00"
            + b"\x00\x90\x43\x40\x83\x60\x80\x43\x40" + END)
    score = parse_smf(smf(body))
    assert score.key == KeyLabel(7, "major")
    assert score.parts[0][0].pitch == 67


@pytest.mark.parametrize("sharps,minor,key", [
    (0, False, KeyLabel(0, "major")), (0, True, KeyLabel(9, "minor")),
    (-1, False, KeyLabel(5, "major")), (3, True, KeyLabel(6, "minor")),
    (-4, True, KeyLabel(5, "minor")), (7, False, KeyLabel(1, "major")),
])
def test_key_signature(sharps, minor, key):
    assert key_from_signature(sharps, minor) == key


def test_empty_track_list():
    with pytest.raises(MalformedFile):
        parse_smf(smf())


@pytest.mark.parametrize("data", [
    b"", b"RIFF0000", b"MThd\x00\x00\x00\x06\x00\x01\x00\x01",
    smf(b"\x00\x90\x3c", fmt=0),
    smf(END, fmt=2),
    smf(END, division=0),
    smf(END, division=0xE250),
])
def test_malformed(data):
    with pytest.raises(MalformedFile):
        parse_smf(data)


def test_missing_key_signature_defaults():
    score = parse_smf(smf(b"\x00\x90\x3c\x40\x83\x60\x80\x3c\x40" + END))
    assert score.key == KeyLabel(0, "major")


def test_fixture_file_matches_json():
    mid = parse_smf((FIXTURES / "midi" / "chorale_003.mid").read_bytes())
    ref = parse_score_json((FIXTURES / "midi" / "chorale_003.json").read_text())
    assert mid.key == ref.key
    assert [sorted((n.onset, n.duration, n.pitch, n.velocity) for n in v) for v in mid.parts] == \
        [sorted((n.onset, n.duration, n.pitch, n.velocity) for n in v) for v in ref.parts]


def test_writer_round_trip(chorales):
    from tonalvae.synthetic import chorale

    score = chorale(KeyLabel(4, "minor"), n_beats=16, seed=3)
    back = parse_smf(write_smf(score))
    assert back.key == score.key
    assert [tuple(sorted(v, key=lambda n: (n.onset, n.pitch))) for v in back.parts] == \
        [tuple(sorted(v, key=lambda n: (n.onset, n.pitch))) for v in score.parts]
