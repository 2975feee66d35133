from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ShapeError


class EncodingId(str, Enum):
    PIANO_ROLL = "PianoRoll"
    MIDI_LIKE = "MidiLike"
    ABC = "Abc"
    TONNETZ = "Tonnetz"
    PC_DFT = "PcDft"
    PITCH_DFT = "PitchDft"

    def __str__(self):
        return self.value


class Kind(str, Enum):
    BINARY = "binary"
    TOKEN = "token"
    FLOAT = "float"


KIND_OF = {
    EncodingId.PIANO_ROLL: Kind.BINARY,
    EncodingId.TONNETZ: Kind.BINARY,
    EncodingId.MIDI_LIKE: Kind.TOKEN,
    EncodingId.ABC: Kind.TOKEN,
    EncodingId.PC_DFT: Kind.FLOAT,
    EncodingId.PITCH_DFT: Kind.FLOAT,
}

_DTYPES = {Kind.BINARY: np.uint8, Kind.TOKEN: np.int32, Kind.FLOAT: np.float64}


@dataclass(frozen=True, eq=False)
class EncodedTensor:
    """One encoded segment as a 2-D array (rows are timesteps or tokens).

    Token tensors are shaped ``(n_tokens, 1)``.
    """

    encoding_id: EncodingId
    values: np.ndarray

    def __post_init__(self):
        enc = EncodingId(self.encoding_id)
        object.__setattr__(self, "encoding_id", enc)
        arr = np.asarray(self.values)
        if arr.ndim == 1 and KIND_OF[enc] is Kind.TOKEN:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"expected a 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def kind(self) -> Kind:
        return KIND_OF[self.encoding_id]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, EncodedTensor):
            return NotImplemented
        return (self.encoding_id == other.encoding_id and self.shape == other.shape
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.encoding_id, self.shape, self.values.tobytes()))

    def __repr__(self):
        return f"EncodedTensor({self.encoding_id.value}, shape={self.shape})"

    def canonical(self) -> "EncodedTensor":
        """Same tensor with the dtype used by caches and equality tests."""
        return EncodedTensor(self.encoding_id, self.values.astype(_DTYPES[self.kind]))


def dtype_for(kind: Kind):
    return _DTYPES[Kind(kind)]


PAD = "<pad>"
UNK = "<unk>"


class Vocabulary:
    """Immutable bijection between token strings and ids; 0 is PAD, 1 is UNK."""

    def __init__(self, encoding_id, tokens):
        tokens = list(tokens)
        if tokens[:2] != [PAD, UNK]:
            tokens = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.encoding_id = EncodingId(encoding_id)
        self._tokens = tuple(tokens)
        self._index = {t: i for i, t in enumerate(tokens)}

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self.encoding_id == other.encoding_id
                and self._tokens == other._tokens)

    def __hash__(self):
        return hash((self.encoding_id, self._tokens))

    def id(self, token: str) -> int:
        return self._index.get(token, 1)

    def token(self, idx: int) -> str:
        if 0 <= idx < len(self._tokens):
            return self._tokens[idx]
        return UNK

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.id(t) for t in tokens], dtype=np.int32)

    def decode(self, ids) -> list[str]:
        return [self.token(int(i)) for i in np.asarray(ids).ravel()]

    def dumps(self) -> str:
        return "".join(t + "\n" for t in self._tokens)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, encoding_id, text: str) -> "Vocabulary":
        return cls(encoding_id, text.splitlines())

    @classmethod
    def load(cls, encoding_id, path) -> "Vocabulary":
        return cls.loads(encoding_id, Path(path).read_text(encoding="utf-8"))


def packaged_vocabulary(encoding_id, filename) -> Vocabulary:
    text = resources.files("tonalvae.data").joinpath(filename).read_text(encoding="utf-8")
    return Vocabulary.loads(encoding_id, text)


def check_encoding(t: EncodedTensor, expected: EncodingId, width: int | None = None) -> None:
    if t.encoding_id != expected:
        raise ShapeError(f"expected a {expected.value} tensor, got {t.encoding_id.value}")
    if width is not None and t.shape[1] != width:
        raise ShapeError(f"{expected.value} tensor must be {width} wide, got {t.shape[1]}")
