import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import segments
from tonalvae.encodings import EncodedTensor, EncodingId
from tonalvae.errors import ShapeError
from tonalvae.score import EMPTY_SLICE, Segment, TimestepSlice, transpose_segment
from tonalvae.spectral import (ComplexSpectrum, decode_pc_dft, decode_pitch_dft, dft_real, encode_pc_dft,
                               encode_pitch_dft, idft_truncated, pc_slices, rotate_phases, shift_phases)

S = TimestepSlice


def seg(*slices):
    return Segment("t", 0, tuple(slices) + (EMPTY_SLICE,) * (10 - len(slices)))


def brute_dft(v):
    m = len(v)
    return [sum(v[n] * cmath.exp(-2j * math.pi * k * n / m) for n in range(m)) for k in range(m // 2 + 1)]


def bins_of(row, n_bins, half):
    start = 2 * n_bins * half
    return row[start:start + 2 * n_bins:2] + 1j * row[start + 1:start + 2 * n_bins:2]


def test_dft_trivial():
    assert np.all(dft_real(np.zeros(12)).bins == 0)
    imp = np.zeros(12)
    imp[0] = 1
    assert np.allclose(dft_real(imp).bins, 1)


def test_dft_triad_against_brute_force():
    v = np.zeros(12)
    v[[0, 4, 7]] = 1
    z = dft_real(v)
    assert z.bins[0] == 3 and z.bins[0].imag == 0
    assert np.allclose(z.bins, brute_dft(v.tolist()), atol=1e-12)


@given(st.lists(st.integers(0, 1), min_size=128, max_size=128))
def test_dft_128_against_brute_force(v):
    assert np.allclose(dft_real(v).bins, brute_dft(v), atol=1e-9)


def test_exhaustive_inverse_sweep_m12():
    vs = np.array(list(itertools.product((0, 1), repeat=12)), dtype=float)
    spec = dft_real(vs)
    assert np.all(spec.bins[:, 0].imag == 0)
    assert np.array_equal(spec.bins[:, 0].real, vs.sum(axis=1))
    back = idft_truncated(spec)
    assert np.max(np.abs(back - vs)) < 1e-9
    assert np.array_equal(back >= 0.5, vs == 1)


def test_parseval_m12():
    rng = np.random.default_rng(0)
    for v in rng.integers(0, 2, size=(200, 12)).astype(float):
        b = np.abs(dft_real(v).bins) ** 2
        assert abs(np.sum(v ** 2) - (b[0] + 2 * b[1:6].sum() + b[6]) / 12) <= 1e-9


def test_idft_zero():
    assert np.all(idft_truncated(ComplexSpectrum(np.zeros(7, complex), 12)) == 0)


def test_idft_rejects_too_many_bins():
    with pytest.raises(ValueError):
        idft_truncated(ComplexSpectrum(np.zeros(8, complex), 12))


def test_shift_phases_analytic():
    for m in (12, 128):
        a = shift_phases(m)
        assert a[0] == 0
        k = np.arange(m // 2 + 1)
        expected = np.angle(np.exp(-2j * np.pi * k / m))
        assert np.max(np.abs(np.angle(np.exp(1j * (a - expected))))) < 1e-12


# -- PcDft -------------------------------------------------------------------------------------

def test_pc_dft_layout():
    t = encode_pc_dft(seg(S({60, 64, 67}, set())))
    assert t.shape == (10, 28)
    assert bins_of(t.values[0], 7, 0)[0] == 3
    assert np.all(bins_of(t.values[0], 7, 1) == 0)
    assert np.all(t.values[1:] == 0)


def test_pc_dft_empty_and_impulse():
    assert np.all(encode_pc_dft(seg()).values == 0)
    assert all(s.is_empty for s in decode_pc_dft(EncodedTensor(EncodingId.PC_DFT, np.zeros((10, 28)))).slices)
    row = np.zeros(28)
    row[0:14:2] = 1.0  # spectrum of an impulse at pitch class 0
    t = EncodedTensor(EncodingId.PC_DFT, np.vstack([row, np.zeros((9, 28))]))
    assert decode_pc_dft(t).slices[0] == S({60}, set())


def test_pc_dft_exhaustive_pc_round_trip():
    for bits in range(4096):
        pcs = {p for p in range(12) if bits >> p & 1}
        s = seg(S({60 + p for p in pcs}, set()), S(set(), {60 + p for p in pcs}))
        assert pc_slices(decode_pc_dft(encode_pc_dft(s))) == pc_slices(s)


def test_pc_dft_attack_and_continuation_same_class():
    s = seg(S({48}, set()), S({60}, {48}))
    assert pc_slices(decode_pc_dft(encode_pc_dft(s))) == pc_slices(s)


@pytest.mark.filterwarnings("ignore::tonalvae.errors.TranspositionFold")
@given(segments(), st.integers(0, 11))
def test_pc_dft_magnitudes_invariant_under_transpose(s, t):
    a = encode_pc_dft(s).values
    b = encode_pc_dft(transpose_segment(s, t)).values if t else a
    for half in (0, 1):
        for ra, rb in zip(a, b):
            assert np.allclose(np.abs(bins_of(ra, 7, half)), np.abs(bins_of(rb, 7, half)), atol=1e-9)


def test_pc_dft_wrong_width():
    with pytest.raises(ShapeError):
        decode_pc_dft(EncodedTensor(EncodingId.PC_DFT, np.zeros((10, 24))))


# -- PitchDft ---------------------------------------------------------------------------------

def test_pitch_dft_single_pitch():
    t = encode_pitch_dft(seg(S({60}, set())))
    assert t.shape == (10, 256)
    assert bins_of(t.values[0], 64, 0)[0] == 1
    assert np.all(encode_pitch_dft(seg()).values == 0)


def test_pitch_dft_exhaustive_single_pitches():
    for p in range(128):
        s = seg(S({p}, set()), S(set(), {p}))
        assert decode_pitch_dft(encode_pitch_dft(s)).slices == s.slices


def test_pitch_dft_exhaustive_pairs():
    pairs = list(itertools.combinations(range(128), 2))
    v = np.zeros((len(pairs), 128))
    for i, (a, b) in enumerate(pairs):
        v[i, [a, b]] = 1
    back = idft_truncated(dft_real(v, 64), 128) >= 0.5
    assert np.array_equal(back, v == 1)


@given(segments())
def test_pitch_dft_round_trip(s):
    assert decode_pitch_dft(encode_pitch_dft(s)).slices == s.slices


def test_pitch_dft_on_chorales(chorale_segments):
    for s in chorale_segments:
        assert decode_pitch_dft(encode_pitch_dft(s)).slices == s.slices


# -- rotation -------------------------------------------------------------------------------------

@given(segments(), st.integers(-12, 12))
def test_rotation_preserves_magnitudes_and_dc(s, t):
    for enc, n in ((encode_pc_dft, 7), (encode_pitch_dft, 64)):
        x = enc(s)
        y = rotate_phases(x, t)
        for ra, rb in zip(x.values, y.values):
            for half in (0, 1):
                a, b = bins_of(ra, n, half), bins_of(rb, n, half)
                assert np.max(np.abs(np.abs(a) - np.abs(b))) <= 1e-9
                assert abs(a[0] - b[0]) <= 1e-12


@pytest.mark.filterwarnings("ignore::tonalvae.errors.TranspositionFold")
@given(segments(), st.integers(-5, 6))
def test_pc_rotation_commutes_with_transpose(s, t):
    a = rotate_phases(encode_pc_dft(s), t)
    b = encode_pc_dft(transpose_segment(s, t)) if t else encode_pc_dft(s)
    assert np.allclose(a.values, b.values, atol=1e-9)
    assert pc_slices(decode_pc_dft(a)) == pc_slices(transpose_segment(s, t))


@given(segments(lo=10, hi=117), st.integers(-5, 6))
def test_pitch_rotation_commutes_with_transpose(s, t):
    a = rotate_phases(encode_pitch_dft(s), t)
    b = encode_pitch_dft(transpose_segment(s, t))
    assert np.allclose(a.values, b.values, atol=1e-9)
    assert decode_pitch_dft(a).slices == transpose_segment(s, t).slices


def test_rotation_identities():
    s = seg(S({60, 64, 67}, set()), S(set(), {60}))
    x = encode_pc_dft(s)
    assert np.array_equal(rotate_phases(x, 0).values, x.values)
    assert np.allclose(rotate_phases(x, 12).values, x.values, atol=1e-12)
    y = encode_pitch_dft(s)
    assert np.allclose(rotate_phases(y, 128).values, y.values, atol=1e-9)


def test_rotation_rejects_other_encodings():
    with pytest.raises(ShapeError):
        rotate_phases(EncodedTensor(EncodingId.PIANO_ROLL, np.zeros((10, 256))), 1)


def test_rotation_formula_by_hand():
    # a single bin at angle 0 rotated by t steps of -2*pi*k/m
    row = np.zeros((1, 28))
    row[0, 2] = 1.0  # bin 1 of the attack half, re = 1
    out = rotate_phases(EncodedTensor(EncodingId.PC_DFT, row), 3).values[0]
    theta = 3 * (-2 * math.pi / 12)
    assert out[2] == pytest.approx(math.cos(theta), abs=1e-12)
    assert out[3] == pytest.approx(math.sin(theta), abs=1e-12)
