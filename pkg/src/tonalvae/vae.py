"""Dense variational autoencoder in plain numpy, with manual backprop.

Encoder: ``x -> tanh -> (mu, logvar)``; decoder: ``z -> tanh -> logits``.
The output head depends on the loss family: sigmoid for binary
cross-entropy, a softmax per token position for categorical cross-entropy,
identity for squared error.  The training objective is the negative ELBO,
reconstruction plus ``beta`` times ``KL(q(z|x) || N(0, I))``, averaged over
the batch.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .encodings.base import EncodingId
from .errors import MalformedFile, NonFinite, ShapeError

LOGVAR_MIN, LOGVAR_MAX = -20.0, 20.0
PARAM_ORDER = ("enc_w", "enc_b", "mu_w", "mu_b", "lv_w", "lv_b", "dec_w", "dec_b", "out_w", "out_b")


class LossKind(str, Enum):
    CATEGORICAL_CE = "categorical_ce"
    BINARY_CE = "binary_ce"
    MSE = "mse"


def assign_loss(encoding_id) -> LossKind:
    enc = EncodingId(encoding_id)
    if enc in (EncodingId.MIDI_LIKE, EncodingId.ABC):
        return LossKind.CATEGORICAL_CE
    if enc in (EncodingId.PIANO_ROLL, EncodingId.TONNETZ):
        return LossKind.BINARY_CE
    return LossKind.MSE


@dataclass
class VaeParams:
    weights: dict
    loss_kind: LossKind
    n_groups: int = 1  # softmax groups (token positions) for categorical output

    @property
    def input_dim(self) -> int:
        return self.weights["enc_w"].shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.weights["enc_w"].shape[1]

    @property
    def latent_dim(self) -> int:
        return self.weights["mu_w"].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights["out_w"].shape[1]

    def copy(self) -> "VaeParams":
        return VaeParams({k: v.copy() for k, v in self.weights.items()}, self.loss_kind, self.n_groups)

    def as_float32(self) -> "VaeParams":
        """Round every weight through float32, as a checkpoint stores them."""
        return VaeParams({k: v.astype(np.float32).astype(np.float64) for k, v in self.weights.items()},
                         self.loss_kind, self.n_groups)


def init_params(input_dim, hidden_dim, latent_dim, loss_kind, rng, n_groups=1, output_dim=None) -> VaeParams:
    """Glorot-uniform weights, zero biases."""
    output_dim = input_dim if output_dim is None else output_dim

    def glorot(n_in, n_out):
        limit = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-limit, limit, size=(n_in, n_out))

    w = {
        "enc_w": glorot(input_dim, hidden_dim), "enc_b": np.zeros(hidden_dim),
        "mu_w": glorot(hidden_dim, latent_dim), "mu_b": np.zeros(latent_dim),
        "lv_w": glorot(hidden_dim, latent_dim), "lv_b": np.zeros(latent_dim),
        "dec_w": glorot(latent_dim, hidden_dim), "dec_b": np.zeros(hidden_dim),
        "out_w": glorot(hidden_dim, output_dim), "out_b": np.zeros(output_dim),
    }
    return VaeParams(w, LossKind(loss_kind), n_groups)


@dataclass(frozen=True)
class LossBreakdown:
    reconstruction: float
    kl: float
    total: float


# -- forward pieces ---------------------------------------------------------

def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _softmax_groups(logits, n_groups):
    b = logits.shape[0]
    g = logits.reshape(b, n_groups, -1)
    g = g - g.max(axis=-1, keepdims=True)
    e = np.exp(g)
    return (e / e.sum(axis=-1, keepdims=True)).reshape(b, -1)


def output_head(logits, kind, n_groups=1):
    kind = LossKind(kind)
    if kind is LossKind.BINARY_CE:
        return _sigmoid(logits)
    if kind is LossKind.CATEGORICAL_CE:
        return _softmax_groups(logits, n_groups)
    return logits


def _check_input(p: VaeParams, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != p.input_dim:
        raise ShapeError(f"input width {x.shape[1]} does not match model input {p.input_dim}")
    return x


def encode_latent(p: VaeParams, x):
    """Deterministic encoder pass (no dropout); returns ``(mu, logvar)``."""
    x = _check_input(p, x)
    w = p.weights
    h = np.tanh(x @ w["enc_w"] + w["enc_b"])
    mu = h @ w["mu_w"] + w["mu_b"]
    logvar = np.clip(h @ w["lv_w"] + w["lv_b"], LOGVAR_MIN, LOGVAR_MAX)
    return mu, logvar


def reparameterize(mu, logvar, rng):
    mu = np.asarray(mu, dtype=float)
    logvar = np.clip(np.asarray(logvar, dtype=float), LOGVAR_MIN, LOGVAR_MAX)
    if mu.shape != logvar.shape:
        raise ShapeError("mu and logvar differ in shape")
    return mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape)


def decode_latent(p: VaeParams, z):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != p.latent_dim:
        raise ShapeError(f"latent width {z.shape[1]} does not match {p.latent_dim}")
    w = p.weights
    h = np.tanh(z @ w["dec_w"] + w["dec_b"])
    return output_head(h @ w["out_w"] + w["out_b"], p.loss_kind, p.n_groups)


def reconstruct(p: VaeParams, x):
    """Decode the posterior mean; the usual deterministic reconstruction."""
    mu, _ = encode_latent(p, x)
    return decode_latent(p, mu)


def kl_divergence(mu, logvar):
    """Per-example ``KL(N(mu, exp(logvar)) || N(0, I))``."""
    mu = np.atleast_2d(mu)
    logvar = np.atleast_2d(logvar)
    return 0.5 * np.sum(np.exp(logvar) + mu ** 2 - 1.0 - logvar, axis=1)


def _reconstruction_terms(x, logits, kind, n_groups):
    """Per-example reconstruction loss and its gradient w.r.t. the logits."""
    if kind is LossKind.BINARY_CE:
        # softplus(a) - x*a == -[x log s(a) + (1-x) log(1-s(a))]
        rec = np.sum(np.logaddexp(0.0, logits) - x * logits, axis=1)
        grad = _sigmoid(logits) - x
    elif kind is LossKind.CATEGORICAL_CE:
        b = logits.shape[0]
        g = logits.reshape(b, n_groups, -1)
        shifted = g - g.max(axis=-1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        log_probs = shifted - log_norm
        xg = x.reshape(b, n_groups, -1)
        rec = -np.sum(xg * log_probs, axis=(1, 2))
        grad = (np.exp(log_probs) * xg.sum(axis=-1, keepdims=True) - xg).reshape(b, -1)
    else:
        diff = logits - x
        rec = np.sum(diff ** 2, axis=1)
        grad = 2.0 * diff
    return rec, grad


def loss(x, xhat, mu, logvar, kind, beta: float = 1.0) -> LossBreakdown:
    """Batch-mean negative ELBO from head outputs ``xhat`` (probabilities or values)."""
    kind = LossKind(kind)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    if x.shape != xhat.shape:
        raise ShapeError(f"target {x.shape} and reconstruction {xhat.shape} differ")
    b = max(x.shape[0], 1)
    if kind is LossKind.BINARY_CE:
        q = np.clip(xhat, 1e-12, 1 - 1e-12)
        rec = -np.sum(x * np.log(q) + (1 - x) * np.log(1 - q))
    elif kind is LossKind.CATEGORICAL_CE:
        rec = -np.sum(x * np.log(np.clip(xhat, 1e-12, None)))
    else:
        rec = np.sum((xhat - x) ** 2)
    kl = float(np.sum(kl_divergence(mu, logvar)))
    out = LossBreakdown(float(rec) / b, kl / b, (float(rec) + beta * kl) / b)
    if not all(np.isfinite([out.reconstruction, out.kl, out.total])):
        raise NonFinite(f"non-finite loss {out}")
    return out


# -- training step ----------------------------------------------------------

@dataclass
class Noise:
    """Random draws for one forward pass, kept so backward can reuse them."""

    eps: np.ndarray
    mask_enc: np.ndarray | None = None
    mask_dec: np.ndarray | None = None

    @classmethod
    def draw(cls, rng, batch, p: VaeParams, dropout_rate: float = 0.0) -> "Noise":
        eps = rng.standard_normal((batch, p.latent_dim))
        if dropout_rate <= 0:
            return cls(eps)
        keep = 1.0 - dropout_rate
        m1 = (rng.random((batch, p.hidden_dim)) < keep) / keep
        m2 = (rng.random((batch, p.hidden_dim)) < keep) / keep
        return cls(eps, m1, m2)


def forward_backward(p: VaeParams, x, noise: Noise, beta: float = 1.0):
    """Loss and exact gradients for one batch under fixed noise."""
    x = _check_input(p, x)
    w = p.weights
    b = x.shape[0]
    if b == 0:
        return LossBreakdown(0.0, 0.0, 0.0), {k: np.zeros_like(v) for k, v in w.items()}

    h1 = np.tanh(x @ w["enc_w"] + w["enc_b"])
    h1d = h1 if noise.mask_enc is None else h1 * noise.mask_enc
    mu = h1d @ w["mu_w"] + w["mu_b"]
    lv_raw = h1d @ w["lv_w"] + w["lv_b"]
    lv = np.clip(lv_raw, LOGVAR_MIN, LOGVAR_MAX)
    std = np.exp(0.5 * lv)
    z = mu + std * noise.eps
    h2 = np.tanh(z @ w["dec_w"] + w["dec_b"])
    h2d = h2 if noise.mask_dec is None else h2 * noise.mask_dec
    logits = h2d @ w["out_w"] + w["out_b"]

    rec, dlogits = _reconstruction_terms(x, logits, p.loss_kind, p.n_groups)
    kl = kl_divergence(mu, lv)
    result = LossBreakdown(float(rec.sum()) / b, float(kl.sum()) / b,
                           float(rec.sum() + beta * kl.sum()) / b)
    if not np.isfinite(result.total):
        raise NonFinite(f"non-finite loss {result}")

    g = {}
    dlogits = dlogits / b
    g["out_w"] = h2d.T @ dlogits
    g["out_b"] = dlogits.sum(axis=0)
    dh2 = dlogits @ w["out_w"].T
    if noise.mask_dec is not None:
        dh2 = dh2 * noise.mask_dec
    dpre2 = dh2 * (1.0 - h2 ** 2)
    g["dec_w"] = z.T @ dpre2
    g["dec_b"] = dpre2.sum(axis=0)
    dz = dpre2 @ w["dec_w"].T

    dmu = dz + beta * mu / b
    dlv = dz * noise.eps * 0.5 * std + beta * 0.5 * (np.exp(lv) - 1.0) / b
    dlv = dlv * ((lv_raw > LOGVAR_MIN) & (lv_raw < LOGVAR_MAX))
    g["mu_w"] = h1d.T @ dmu
    g["mu_b"] = dmu.sum(axis=0)
    g["lv_w"] = h1d.T @ dlv
    g["lv_b"] = dlv.sum(axis=0)
    dh1 = dmu @ w["mu_w"].T + dlv @ w["lv_w"].T
    if noise.mask_enc is not None:
        dh1 = dh1 * noise.mask_enc
    dpre1 = dh1 * (1.0 - h1 ** 2)
    g["enc_w"] = x.T @ dpre1
    g["enc_b"] = dpre1.sum(axis=0)
    for k, v in g.items():
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"non-finite gradient for {k}")
    return result, g


def backward(p: VaeParams, batch, rng, dropout_rate: float = 0.0, beta: float = 1.0):
    """Gradients of the batch loss; noise comes from ``rng``."""
    batch = _check_input(p, batch)
    noise = Noise.draw(rng, batch.shape[0], p, dropout_rate)
    _, grads = forward_backward(p, batch, noise, beta)
    return grads


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, p: VaeParams, **hyper) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in p.weights.items()},
                   {k: np.zeros_like(a) for k, a in p.weights.items()}, **hyper)


def adam_update(param, grad, m, v, step, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns new (param, m, v)."""
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** step)
    v_hat = v / (1 - beta2 ** step)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(p: VaeParams, grads: dict, state: AdamState) -> tuple[VaeParams, AdamState]:
    step = state.step + 1
    new_w, new_m, new_v = {}, {}, {}
    for k in p.weights:
        new_w[k], new_m[k], new_v[k] = adam_update(
            p.weights[k], grads[k], state.m[k], state.v[k], step,
            state.lr, state.beta1, state.beta2, state.eps)
    return (VaeParams(new_w, p.loss_kind, p.n_groups),
            replace(state, m=new_m, v=new_v, step=step))


# -- training loop ------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 256
    seed: int = 0
    loss_kind: LossKind = LossKind.MSE
    dropout_rate: float = 0.2
    latent_dim: int = 256
    hidden_dim: int = 1024
    learning_rate: float = 1e-4
    beta: float = 1.0

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)


def one_hot(ids, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    out = np.zeros(ids.shape + (vocab_size,))
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out.reshape(ids.shape[0], -1)


class ModelInput:
    """Turns stored rows into model-ready float batches.

    Token datasets are kept as integer ids and one-hot expanded per batch.
    """

    def __init__(self, data, vocab_size: int | None = None):
        self.data = np.asarray(data)
        self.vocab_size = vocab_size
        if self.data.ndim != 2:
            if self.data.size == 0:
                raise ShapeError("empty dataset")
            self.data = self.data.reshape(len(self.data), -1)
        if vocab_size is None:
            self.data = self.data.astype(float)

    def __len__(self):
        return len(self.data)

    @property
    def n_groups(self) -> int:
        return self.data.shape[1] if self.vocab_size else 1

    @property
    def width(self) -> int:
        return self.data.shape[1] * (self.vocab_size or 1)

    def batch(self, idx) -> np.ndarray:
        rows = self.data[idx]
        return one_hot(rows, self.vocab_size) if self.vocab_size else rows


def train(dataset, config: TrainConfig, vocab_size: int | None = None):
    """Fit a VAE; returns ``(params, history)`` with per-epoch mean losses."""
    data = dataset if isinstance(dataset, ModelInput) else ModelInput(dataset, vocab_size)
    if len(data) == 0:
        raise ShapeError("empty dataset")
    rng = np.random.default_rng(config.seed)
    params = init_params(data.width, config.hidden_dim, config.latent_dim, config.loss_kind, rng,
                         n_groups=data.n_groups)
    state = AdamState.for_params(params, lr=config.learning_rate)
    history: list[LossBreakdown] = []
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sums = np.zeros(3)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            x = data.batch(idx)
            noise = Noise.draw(rng, len(idx), params, config.dropout_rate)
            try:
                result, grads = forward_backward(params, x, noise, config.beta)
            except NonFinite as exc:
                raise NonFinite(f"epoch {epoch}, batch {b}: {exc}") from exc
            params, state = adam_step(params, grads, state)
            sums += len(idx) * np.array([result.reconstruction, result.kl, result.total])
        rec, kl, total = sums / n
        history.append(LossBreakdown(rec, kl, total))
    return params, history


def predict(p: VaeParams, data: ModelInput, batch_size: int = 512):
    """Posterior means and mean-decoded reconstructions for every row."""
    mus, outs = [], []
    for start in range(0, len(data), batch_size):
        x = data.batch(np.arange(start, min(start + batch_size, len(data))))
        mu, _ = encode_latent(p, x)
        mus.append(mu)
        outs.append(decode_latent(p, mu))
    if not mus:
        return np.zeros((0, p.latent_dim)), np.zeros((0, p.output_dim))
    return np.concatenate(mus), np.concatenate(outs)


# -- checkpoint file ------------------------------------------------------------

CKPT_MAGIC = b"TVAECKPT"
CKPT_VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _unpack_str(buf, pos):
    (n,) = struct.unpack_from("<H", buf, pos)
    return buf[pos + 2:pos + 2 + n].decode("utf-8"), pos + 2 + n


def dump_checkpoint(p: VaeParams, encoding_id) -> bytes:
    out = io.BytesIO()
    out.write(CKPT_MAGIC)
    out.write(struct.pack("<I", CKPT_VERSION))
    out.write(_pack_str(EncodingId(encoding_id).value))
    out.write(struct.pack("<5I", p.input_dim, p.hidden_dim, p.latent_dim, p.output_dim, p.n_groups))
    out.write(_pack_str(p.loss_kind.value))
    for k in PARAM_ORDER:
        out.write(p.weights[k].astype("<f4").tobytes())
    return out.getvalue()


def load_checkpoint_bytes(buf: bytes) -> tuple[VaeParams, EncodingId]:
    try:
        return _read_checkpoint(buf)
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise MalformedFile(f"corrupt checkpoint: {exc}") from exc


def _read_checkpoint(buf: bytes) -> tuple[VaeParams, EncodingId]:
    if buf[:8] != CKPT_MAGIC:
        raise MalformedFile("not a checkpoint file")
    (version,) = struct.unpack_from("<I", buf, 8)
    if version != CKPT_VERSION:
        raise MalformedFile(f"unsupported checkpoint version {version}")
    enc, pos = _unpack_str(buf, 12)
    d_in, hid, lat, d_out, groups = struct.unpack_from("<5I", buf, pos)
    pos += 20
    kind, pos = _unpack_str(buf, pos)
    shapes = {"enc_w": (d_in, hid), "enc_b": (hid,), "mu_w": (hid, lat), "mu_b": (lat,),
              "lv_w": (hid, lat), "lv_b": (lat,), "dec_w": (lat, hid), "dec_b": (hid,),
              "out_w": (hid, d_out), "out_b": (d_out,)}
    weights = {}
    for k in PARAM_ORDER:
        count = int(np.prod(shapes[k]))
        if pos + 4 * count > len(buf):
            raise MalformedFile(f"checkpoint truncated at {k}")
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=pos)
        weights[k] = arr.astype(np.float64).reshape(shapes[k])
        pos += 4 * count
    if pos != len(buf):
        raise MalformedFile("trailing bytes in checkpoint")
    return VaeParams(weights, LossKind(kind), groups), EncodingId(enc)


def save_checkpoint(path, p: VaeParams, encoding_id) -> None:
    Path(path).write_bytes(dump_checkpoint(p, encoding_id))


def load_checkpoint(path) -> tuple[VaeParams, EncodingId]:
    return load_checkpoint_bytes(Path(path).read_bytes())


# -- reconstruction metrics -----------------------------------------------------

KL_SMOOTHING = 1e-7


def _slice_sets(values, encoding_id, threshold=0.5):
    from . import spectral

    enc = EncodingId(encoding_id)
    if enc == EncodingId.PC_DFT:
        m, n_bins, width = 12, spectral.PC_BINS, spectral.PC_WIDTH
    elif enc == EncodingId.PITCH_DFT:
        m, n_bins, width = 128, spectral.PITCH_BINS, spectral.PITCH_WIDTH
    else:
        raise ValueError(f"slice-level accuracy needs a spectral encoding, got {enc.value}")
    rows = np.asarray(values, dtype=float).reshape(-1, width)
    att, cont = spectral._decode_halves(rows, m, n_bins, threshold)
    return np.concatenate([att, cont], axis=1)


def reconstruction_metrics(x, xhat, kind, *, vocab_size: int | None = None,
                           encoding_id=None) -> tuple[float, float, float]:
    """Accuracy (percent), mean squared error, and value-distribution KL.

    Accuracy depends on the loss family: token positions whose argmax
    matches (categorical), cells matching after a 0.5 threshold (binary),
    or slices whose decoded pitch sets match exactly (spectral, which needs
    ``encoding_id``).  The KL term treats each example's absolute cell
    values as a distribution, smoothed by a small constant, and averages
    ``KL(x || xhat)`` over examples.
    """
    kind = LossKind(kind)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    if x.shape != xhat.shape:
        raise ShapeError(f"target {x.shape} and reconstruction {xhat.shape} differ")
    if x.size == 0:
        return float("nan"), float("nan"), float("nan")
    if kind is LossKind.CATEGORICAL_CE:
        if not vocab_size:
            raise ValueError("categorical accuracy needs vocab_size")
        t = x.reshape(x.shape[0], -1, vocab_size).argmax(axis=-1)
        h = xhat.reshape(x.shape[0], -1, vocab_size).argmax(axis=-1)
        acc = float(np.mean(t == h))
    elif kind is LossKind.BINARY_CE:
        acc = float(np.mean((xhat >= 0.5) == (x >= 0.5)))
    else:
        if encoding_id is None:
            raise ValueError("spectral accuracy needs encoding_id")
        acc = float(np.mean(np.all(_slice_sets(x, encoding_id) == _slice_sets(xhat, encoding_id), axis=1)))
    mse = float(np.mean((x - xhat) ** 2))
    p = np.abs(x) + KL_SMOOTHING
    q = np.abs(xhat) + KL_SMOOTHING
    p /= p.sum(axis=1, keepdims=True)
    q /= q.sum(axis=1, keepdims=True)
    kl = float(np.mean(np.sum(p * np.log(p / q), axis=1)))
    return 100.0 * acc, mse, kl
