"""DFT of binary pitch and pitch-class vectors, and the two spectral codecs.

Transposition acts on a DFT by the shift theorem: moving a length-``m``
vector ``t`` places to the right multiplies bin ``k`` by ``exp(-2j*pi*k*t/m)``.
The per-bin angle is read off the spectrum of the unit-shift impulse
(:func:`shift_phases`) and each bin is rotated by ``t`` times that angle.
Magnitudes never change, so transposition is pure phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .encodings.base import EncodedTensor, EncodingId, check_encoding
from .score import Segment, TimestepSlice

PC_BINS = 7  # 12 // 2 + 1
PITCH_BINS = 64
PC_WIDTH = 4 * PC_BINS
PITCH_WIDTH = 4 * PITCH_BINS
PC_DECODE_OCTAVE = 60


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    bins: np.ndarray  # complex, non-negative frequencies only
    m: int

    @property
    def re(self) -> np.ndarray:
        return self.bins.real

    @property
    def im(self) -> np.ndarray:
        return self.bins.imag

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.bins)


@lru_cache(maxsize=None)
def _dft_matrix(m: int, n_bins: int) -> np.ndarray:
    k = np.arange(n_bins)[:, None]
    n = np.arange(m)[None, :]
    mat = np.exp(-2j * np.pi * ((k * n) % m) / m)
    mat[0] = 1.0  # keep the DC row exactly real
    mat.setflags(write=False)
    return mat


def dft_real(v, n_bins: int | None = None) -> ComplexSpectrum:
    """Direct DFT of a real vector, bins 0..m/2 (or the first ``n_bins``)."""
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    n_bins = m // 2 + 1 if n_bins is None else n_bins
    return ComplexSpectrum(v @ _dft_matrix(m, n_bins).T, m)


def idft_truncated(s: ComplexSpectrum, m: int | None = None) -> np.ndarray:
    """Inverse DFT from the non-negative bins; absent high bins count as zero."""
    m = s.m if m is None else m
    bins = np.asarray(s.bins, dtype=complex)
    n_bins = bins.shape[-1]
    if n_bins > m // 2 + 1:
        raise ValueError(f"{n_bins} bins exceed m/2+1 for m={m}")
    k = np.arange(n_bins)
    weight = np.where((k == 0) | (2 * k == m), 1.0, 2.0)
    n = np.arange(m)
    basis = np.exp(2j * np.pi * ((k[:, None] * n[None, :]) % m) / m)
    return ((bins * weight) @ basis).real / m


@lru_cache(maxsize=None)
def shift_phases(m: int) -> np.ndarray:
    """Per-bin phase of the unit-shift impulse (equals -2*pi*k/m)."""
    impulse = np.zeros(m)
    impulse[1] = 1.0
    z = dft_real(impulse).bins
    angles = np.arctan2(z.imag, z.real)
    angles[0] = 0.0
    angles.setflags(write=False)
    return angles


def rotate_bins(re, im, angles, semitones: int):
    """Rotate complex bins by ``semitones`` times their shift angle."""
    theta = semitones * angles
    c, s = np.cos(theta), np.sin(theta)
    return re * c - im * s, re * s + im * c


def _interleave(bins: np.ndarray) -> np.ndarray:
    out = np.empty(bins.shape[:-1] + (2 * bins.shape[-1],))
    out[..., 0::2] = bins.real
    out[..., 1::2] = bins.imag
    return out


def _deinterleave(values: np.ndarray) -> np.ndarray:
    return values[..., 0::2] + 1j * values[..., 1::2]


def _binary_halves(seg: Segment, pitch_class: bool):
    m = 12 if pitch_class else 128
    att = np.zeros((len(seg.slices), m))
    cont = np.zeros((len(seg.slices), m))
    for i, s in enumerate(seg.slices):
        for p in s.attacks:
            att[i, p % m] = 1.0
        for p in s.continuations:
            cont[i, p % m] = 1.0
    return att, cont


def encode_pc_dft(seg: Segment) -> EncodedTensor:
    att, cont = _binary_halves(seg, pitch_class=True)
    row = np.concatenate([_interleave(dft_real(att).bins), _interleave(dft_real(cont).bins)], axis=1)
    return EncodedTensor(EncodingId.PC_DFT, row.reshape(len(seg.slices), PC_WIDTH))


def encode_pitch_dft(seg: Segment) -> EncodedTensor:
    att, cont = _binary_halves(seg, pitch_class=False)
    row = np.concatenate([_interleave(dft_real(att, PITCH_BINS).bins),
                          _interleave(dft_real(cont, PITCH_BINS).bins)], axis=1)
    return EncodedTensor(EncodingId.PITCH_DFT, row.reshape(len(seg.slices), PITCH_WIDTH))


def _decode_halves(values: np.ndarray, m: int, n_bins: int, threshold: float):
    half = 2 * n_bins
    att = idft_truncated(ComplexSpectrum(_deinterleave(values[:, :half]), m)) >= threshold
    cont = idft_truncated(ComplexSpectrum(_deinterleave(values[:, half:]), m)) >= threshold
    return att, cont


def decode_pc_dft(t: EncodedTensor, threshold: float = 0.5) -> Segment:
    """Pitch classes are placed in the octave starting at middle C.

    A continued pitch class that is also attacked goes one octave higher,
    so both halves survive at the pitch-class level.
    """
    check_encoding(t, EncodingId.PC_DFT, PC_WIDTH)
    att, cont = _decode_halves(np.asarray(t.values, float), 12, PC_BINS, threshold)
    slices = []
    for a, c in zip(att, cont):
        attacks = {PC_DECODE_OCTAVE + pc for pc in np.flatnonzero(a).tolist()}
        conts = {PC_DECODE_OCTAVE + pc + (12 if a[pc] else 0) for pc in np.flatnonzero(c).tolist()}
        slices.append(TimestepSlice(attacks, conts))
    return Segment("", 0, tuple(slices))


def decode_pitch_dft(t: EncodedTensor, threshold: float = 0.5) -> Segment:
    check_encoding(t, EncodingId.PITCH_DFT, PITCH_WIDTH)
    att, cont = _decode_halves(np.asarray(t.values, float), 128, PITCH_BINS, threshold)
    slices = []
    for a, c in zip(att, cont):
        attacks = set(np.flatnonzero(a).tolist())
        slices.append(TimestepSlice(attacks, set(np.flatnonzero(c).tolist()) - attacks))
    return Segment("", 0, tuple(slices))


def rotate_phases(t: EncodedTensor, semitones: int) -> EncodedTensor:
    """Transpose a spectral tensor by rotating every bin's phase.

    For PitchDft this is a circular shift of the 128-pitch vector.
    """
    if t.encoding_id == EncodingId.PC_DFT:
        m, n_bins = 12, PC_BINS
    elif t.encoding_id == EncodingId.PITCH_DFT:
        m, n_bins = 128, PITCH_BINS
    else:
        check_encoding(t, EncodingId.PC_DFT)
    angles = shift_phases(m)[:n_bins]
    values = np.asarray(t.values, dtype=float)
    out = np.empty_like(values)
    for start in (0, 2 * n_bins):
        re = values[:, start:start + 2 * n_bins:2]
        im = values[:, start + 1:start + 2 * n_bins:2]
        new_re, new_im = rotate_bins(re, im, angles, semitones)
        out[:, start:start + 2 * n_bins:2] = new_re
        out[:, start + 1:start + 2 * n_bins:2] = new_im
    return EncodedTensor(t.encoding_id, out)


def pc_slices(seg: Segment) -> tuple[tuple[frozenset, frozenset], ...]:
    """Attack and continuation pitch-class sets per slice."""
    return tuple((frozenset(p % 12 for p in s.attacks), frozenset(p % 12 for p in s.continuations))
                 for s in seg.slices)
