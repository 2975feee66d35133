"""Experiment orchestration: corpus -> split -> augmented cache -> VAE -> reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import vae
from .encodings import EncodingId, Kind, KIND_OF, augment, encode, vocabulary_for
from .encodings.base import dtype_for
from .errors import DataError, MalformedFile
from .metrics import LatentPoint, latent_report
from .score import (TimestepGrid, TranspositionFold, chordify, parse_score_json, quantize, segment,
                    transpose_grid, would_fold)
from .smf import parse_smf

log = logging.getLogger(__name__)

TRANSPOSITIONS = tuple(range(-5, 7))
CSV_COLUMNS = ("piece_id", "davies_bouldin", "dunn", "tau", "accuracy", "mse", "kl")


@dataclass
class ExperimentConfig:
    corpus_dir: str = "corpus"
    encoding_id: EncodingId = EncodingId.PITCH_DFT
    segment_length: int = 10
    split_ratio: float = 0.6
    seed: int = 0
    train: vae.TrainConfig = field(default_factory=vae.TrainConfig)
    output_dir: str = "out"
    resolution: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.encoding_id = EncodingId(self.encoding_id)
        if isinstance(self.train, dict):
            self.train = vae.TrainConfig(**self.train)
        self.train.loss_kind = vae.assign_loss(self.encoding_id)
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie strictly between 0 and 1")
        if self.segment_length < 1:
            raise ValueError("segment_length must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        doc = dict(doc)
        train = dict(doc.pop("train", {}))
        train.pop("loss_kind", None)
        return cls(train=vae.TrainConfig(**train), **doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["encoding_id"] = self.encoding_id.value
        doc["train"]["loss_kind"] = self.train.loss_kind.value
        return doc


# -- corpus -------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    piece_id: str
    grid: TimestepGrid


def load_score(path):
    path = Path(path)
    if path.suffix.lower() in (".mid", ".midi", ".smf"):
        return parse_smf(path.read_bytes(), title=path.stem)
    return parse_score_json(path.read_text(encoding="utf-8"))


def load_corpus(corpus_dir, resolution=None) -> list[Piece]:
    """Parse every score in a directory (sorted by name), quantized and chordified."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise DataError(f"corpus directory not found: {root}")
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".json", ".mid", ".midi", ".smf"))
    pieces = []
    for path in files:
        try:
            score = load_score(path)
        except DataError as exc:
            raise DataError(f"{path.name}: {exc}") from exc
        res = Fraction(resolution) if resolution else None
        pieces.append(Piece(path.stem, chordify(quantize(score, res))))
    if not pieces:
        raise DataError(f"no scores in {root}")
    return pieces


def split_dataset(pieces, ratio: float = 0.6, seed: int = 0):
    """Piece-level seeded split; the first ceil(ratio * n) shuffled pieces train."""
    pieces = list(pieces)
    if len(pieces) < 2:
        raise ValueError("need at least two pieces to split")
    order = np.random.default_rng(seed).permutation(len(pieces))
    n_train = min(max(math.ceil(ratio * len(pieces)), 1), len(pieces) - 1)
    train = [pieces[i] for i in sorted(order[:n_train])]
    test = [pieces[i] for i in sorted(order[n_train:])]
    return train, test


# -- tensor cache -----------------------------------------------------------------

CACHE_MAGIC = b"TVCACHE\x00"
CACHE_VERSION = 1
_KIND_CODE = {Kind.BINARY: 0, Kind.TOKEN: 1, Kind.FLOAT: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass(eq=False)
class CacheEntry:
    piece_id: str
    transposition: int
    kind: Kind
    payload: np.ndarray  # one row per segment; token rows are PAD-padded ids

    def __eq__(self, other):
        return (isinstance(other, CacheEntry) and self.piece_id == other.piece_id
                and self.transposition == other.transposition and self.kind == other.kind
                and self.payload.dtype == other.payload.dtype
                and np.array_equal(self.payload, other.payload))


@dataclass(eq=False)
class TensorCache:
    encoding_id: EncodingId
    segment_length: int
    entries: list = field(default_factory=list)

    def __eq__(self, other):
        return (isinstance(other, TensorCache) and self.encoding_id == other.encoding_id
                and self.segment_length == other.segment_length and self.entries == other.entries)

    def piece_ids(self) -> set:
        return {e.piece_id for e in self.entries}

    def to_bytes(self) -> bytes:
        out = io.BytesIO()
        enc = self.encoding_id.value.encode()
        out.write(CACHE_MAGIC)
        out.write(struct.pack("<IH", CACHE_VERSION, len(enc)))
        out.write(enc)
        out.write(struct.pack("<II", self.segment_length, len(self.entries)))
        for e in self.entries:
            pid = e.piece_id.encode("utf-8")
            rows, cols = e.payload.shape
            out.write(struct.pack("<H", len(pid)) + pid)
            out.write(struct.pack("<iIIB", e.transposition, rows, cols, _KIND_CODE[e.kind]))
            out.write(np.ascontiguousarray(e.payload, dtype=np.dtype(dtype_for(e.kind)).newbyteorder("<")).tobytes())
        return out.getvalue()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "TensorCache":
        try:
            if buf[:8] != CACHE_MAGIC:
                raise MalformedFile("not a tensor cache")
            version, n = struct.unpack_from("<IH", buf, 8)
            if version != CACHE_VERSION:
                raise MalformedFile(f"unsupported cache version {version}")
            pos = 14
            enc = EncodingId(buf[pos:pos + n].decode())
            pos += n
            length, count = struct.unpack_from("<II", buf, pos)
            pos += 8
            cache = cls(enc, length)
            for _ in range(count):
                (n,) = struct.unpack_from("<H", buf, pos)
                pid = buf[pos + 2:pos + 2 + n].decode("utf-8")
                pos += 2 + n
                t, rows, cols, code = struct.unpack_from("<iIIB", buf, pos)
                pos += 13
                kind = _CODE_KIND[code]
                dt = np.dtype(dtype_for(kind)).newbyteorder("<")
                size = rows * cols * dt.itemsize
                if pos + size > len(buf):
                    raise MalformedFile("cache entry truncated")
                payload = np.frombuffer(buf, dtype=dt, count=rows * cols, offset=pos).reshape(rows, cols)
                pos += size
                cache.entries.append(CacheEntry(pid, t, kind, payload.astype(dtype_for(kind))))
            if pos != len(buf):
                raise MalformedFile("trailing bytes after cache entries")
            return cache
        except (struct.error, KeyError, ValueError) as exc:
            raise MalformedFile(f"corrupt tensor cache: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TensorCache":
        return cls.from_bytes(Path(path).read_bytes())


def stack_segments(tensors, kind: Kind) -> np.ndarray:
    """One row per encoded segment; token rows are right-padded with PAD (0)."""
    dt = dtype_for(kind)
    if not tensors:
        return np.zeros((0, 0), dtype=dt)
    if kind is Kind.TOKEN:
        width = max(t.values.shape[0] for t in tensors)
        out = np.zeros((len(tensors), width), dtype=dt)
        for i, t in enumerate(tensors):
            out[i, :t.values.shape[0]] = t.values[:, 0]
        return out
    return np.stack([np.asarray(t.values, dtype=dt).ravel() for t in tensors])


def encode_transpositions(piece: Piece, encoding_id, segment_length: int = 10,
                          transpositions=TRANSPOSITIONS, fast: bool = True) -> list[CacheEntry]:
    """Encode all transpositions of a piece.

    With ``fast`` set, encodings that support it are transposed on the
    tensor; a transposition that would push a pitch out of 0-127 is
    re-encoded instead, so both paths always agree.
    """
    enc = EncodingId(encoding_id)
    kind = KIND_OF[enc]
    segs = segment(piece.grid, segment_length, piece.piece_id)
    base = [encode(enc, s) for s in segs]
    entries = []
    for t in transpositions:
        if t == 0:
            tensors = base
        elif fast and enc in FAST and not would_fold(piece.grid.steps, t):
            tensors = [augment(x, t, segment_length) for x in base]
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TranspositionFold)
                moved = transpose_grid(piece.grid, t)
            tensors = [encode(enc, s) for s in segment(moved, segment_length, piece.piece_id)]
        entries.append(CacheEntry(piece.piece_id, t, kind, stack_segments(tensors, kind)))
    return entries


def build_cache(train_pieces, encoding_id, segment_length: int = 10, workers: int = 1,
                fast: bool = True) -> TensorCache:
    enc = EncodingId(encoding_id)
    cache = TensorCache(enc, segment_length)

    def work(piece):
        return encode_transpositions(piece, enc, segment_length, fast=fast)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, train_pieces))
    else:
        results = [work(p) for p in train_pieces]
    for entries in results:
        cache.entries.extend(entries)
    return cache


from .encodings.registry import FAST_AUGMENT as FAST  # noqa: E402


# -- model data ----------------------------------------------------------------------

def model_rows(rows: np.ndarray, kind: Kind, n_tokens: int | None = None) -> np.ndarray:
    """Pad or truncate token rows to ``n_tokens``; other kinds pass through."""
    if kind is not Kind.TOKEN:
        return np.asarray(rows, dtype=float)
    out = np.zeros((rows.shape[0], n_tokens), dtype=np.int32)
    w = min(n_tokens, rows.shape[1])
    out[:, :w] = rows[:, :w]
    if rows.shape[1] > n_tokens and np.any(rows[:, n_tokens:]):
        log.warning("token rows truncated from %d to %d positions", rows.shape[1], n_tokens)
    return out


def training_input(cache: TensorCache):
    """Stack every cached segment into a :class:`vae.ModelInput`."""
    kind = KIND_OF[cache.encoding_id]
    if not cache.entries:
        raise DataError("tensor cache is empty")
    if kind is Kind.TOKEN:
        n_tokens = max(e.payload.shape[1] for e in cache.entries)
        rows = np.concatenate([model_rows(e.payload, kind, n_tokens) for e in cache.entries])
        vocab = vocabulary_for(cache.encoding_id, cache.segment_length)
        return vae.ModelInput(rows, len(vocab))
    return vae.ModelInput(np.concatenate([e.payload.astype(float) for e in cache.entries]))


def piece_input(piece: Piece, params: vae.VaeParams, encoding_id, segment_length: int,
                transposition: int = 0) -> tuple[vae.ModelInput, list]:
    enc = EncodingId(encoding_id)
    kind = KIND_OF[enc]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TranspositionFold)
        grid = transpose_grid(piece.grid, transposition)
    segs = segment(grid, segment_length, piece.piece_id)
    rows = stack_segments([encode(enc, s) for s in segs], kind)
    if kind is Kind.TOKEN:
        vocab = vocabulary_for(enc, segment_length)
        return vae.ModelInput(model_rows(rows, kind, params.n_groups), len(vocab)), segs
    return vae.ModelInput(rows.astype(float)), segs


def evaluate_piece(piece: Piece, params: vae.VaeParams, encoding_id, segment_length: int = 10):
    """Latent report for the 12 transpositions of one piece, plus its points."""
    enc = EncodingId(encoding_id)
    points = []
    recon = None
    for t in TRANSPOSITIONS:
        data, segs = piece_input(piece, params, enc, segment_length, t)
        mu, xhat = vae.predict(params, data)
        for i, (s, m) in enumerate(zip(segs, mu)):
            points.append(LatentPoint(piece.piece_id, i, s.key, m))
        if t == 0:
            x = data.batch(np.arange(len(data)))
            recon = vae.reconstruction_metrics(x, xhat, params.loss_kind, vocab_size=data.vocab_size,
                                               encoding_id=enc)
    report, projected = latent_report(points, piece.piece_id)
    report.accuracy, report.mse, report.kl = recon
    return report, projected


def test_reconstruction(pieces, params: vae.VaeParams, encoding_id, segment_length: int = 10):
    """Pooled (accuracy %, mse, kl, n_segments) over the original-key segments of ``pieces``."""
    xs, xhats = [], []
    vocab_size = None
    for piece in pieces:
        data, _ = piece_input(piece, params, encoding_id, segment_length)
        vocab_size = data.vocab_size
        xs.append(data.batch(np.arange(len(data))))
        xhats.append(vae.predict(params, data)[1])
    x, xhat = np.concatenate(xs), np.concatenate(xhats)
    acc, mse, kl = vae.reconstruction_metrics(x, xhat, params.loss_kind, vocab_size=vocab_size,
                                              encoding_id=encoding_id)
    return acc, mse, kl, len(x)


# -- reports -------------------------------------------------------------------------------

def fmt(x: float) -> str:
    """Locale-independent, round-trippable number formatting."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(round(x, 12))


def aggregate(values) -> tuple[float, float]:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    return float(np.mean(arr)), float(np.std(arr))


def export_csv(reports, path) -> None:
    """One row per piece plus a final ``mean±std`` row."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to export")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([r.piece_id] + [fmt(getattr(r, c)) for c in CSV_COLUMNS[1:]])
    agg = []
    for c in CSV_COLUMNS[1:]:
        m, s = aggregate(getattr(r, c) for r in reports)
        agg.append(f"{fmt(m)}±{fmt(s)}")
    writer.writerow(["mean±std"] + agg)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_history(history, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(("epoch", "reconstruction", "kl", "total"))
    for i, h in enumerate(history):
        w.writerow((i + 1, fmt(h.reconstruction), fmt(h.kl), fmt(h.total)))
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_reconstruction(encoding_id, recon, path) -> None:
    acc, mse, kl, n = recon
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(("encoding", "segments", "accuracy", "kl", "mse"))
    w.writerow((EncodingId(encoding_id).value, n, fmt(acc), fmt(kl), fmt(mse)))
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def points_to_json(points) -> list[dict]:
    return [{"piece_id": p.piece_id, "segment_index": p.segment_index,
             "key": {"tonic_pc": p.key.tonic_pc, "mode": p.key.mode},
             "xy": list(p.xy) if p.xy is not None else None} for p in points]


def points_from_json(doc) -> list[LatentPoint]:
    from .score import KeyLabel

    return [LatentPoint(d["piece_id"], d["segment_index"], KeyLabel(**d["key"]), np.zeros(0),
                        tuple(d["xy"]) if d["xy"] is not None else None) for d in doc]


# -- end to end ------------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    reports: list
    points: dict
    reconstruction: tuple
    history: list
    params: vae.VaeParams
    cache: TensorCache
    train_ids: list
    test_ids: list


class Paths:
    def __init__(self, output_dir):
        self.root = Path(output_dir)

    def __getattr__(self, name):
        files = {"cache": "cache.bin", "checkpoint": "model.ckpt", "history": "history.csv",
                 "metrics": "metrics.csv", "reconstruction": "reconstruction.csv",
                 "split": "split.json", "points": "latent_points.json", "plots": "plots",
                 "config": "config.json"}
        if name not in files:
            raise AttributeError(name)
        return self.root / files[name]


def train_from_cache(cache: TensorCache, config: vae.TrainConfig):
    params, history = vae.train(training_input(cache), config)
    # evaluate what the checkpoint stores, so library and CLI runs agree
    return params.as_float32(), history


def evaluate(test_pieces, params, encoding_id, segment_length: int = 10, workers: int = 1):
    def work(piece):
        return evaluate_piece(piece, params, encoding_id, segment_length)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, test_pieces))
    else:
        results = [work(p) for p in test_pieces]
    reports = [r for r, _ in results]
    points = {r.piece_id: pts for r, pts in results}
    return reports, points


def write_outputs(out: Paths, reports, points, recon, encoding_id, plot: bool = True) -> None:
    from .plot import render_scatter

    out.root.mkdir(parents=True, exist_ok=True)
    export_csv(reports, out.metrics)
    write_reconstruction(encoding_id, recon, out.reconstruction)
    flat = [p for pid in sorted(points) for p in points[pid]]
    out.points.write_text(json.dumps(points_to_json(flat), indent=1) + "\n", encoding="utf-8")
    if plot:
        out.plots.mkdir(exist_ok=True)
        for pid in sorted(points):
            render_scatter(points[pid], out.plots / f"{pid}.svg", title=pid)


def run_experiment(config: ExperimentConfig, pieces=None, plot: bool = True) -> ExperimentResult:
    """Full run: split, cache the augmented training set, train, evaluate test pieces."""
    out = Paths(config.output_dir)
    out.root.mkdir(parents=True, exist_ok=True)
    if pieces is None:
        pieces = load_corpus(config.corpus_dir, config.resolution)
    train_pieces, test_pieces = split_dataset(pieces, config.split_ratio, config.seed)
    out.split.write_text(json.dumps({"train": [p.piece_id for p in train_pieces],
                                     "test": [p.piece_id for p in test_pieces]}, indent=1) + "\n")
    out.config.write_text(json.dumps(config.to_dict(), indent=1) + "\n")

    cache = build_cache(train_pieces, config.encoding_id, config.segment_length, config.workers)
    assert not cache.piece_ids() & {p.piece_id for p in test_pieces}, "test piece leaked into cache"
    cache.save(out.cache)

    params, history = train_from_cache(cache, config.train)
    vae.save_checkpoint(out.checkpoint, params, config.encoding_id)
    write_history(history, out.history)

    reports, points = evaluate(test_pieces, params, config.encoding_id, config.segment_length, config.workers)
    recon = test_reconstruction(test_pieces, params, config.encoding_id, config.segment_length)
    write_outputs(out, reports, points, recon, config.encoding_id, plot)
    return ExperimentResult(reports, points, recon, history, params, cache,
                            [p.piece_id for p in train_pieces], [p.piece_id for p in test_pieces])
