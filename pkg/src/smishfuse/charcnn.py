"""Character-level CNN stream.

Messages become fixed-length index sequences over a charset built from the
training corpus (printable ASCII plus the most frequent non-ASCII codepoints);
the network is embedding -> parallel multi-width 1-D convolutions -> global
max pooling -> dense hidden -> sigmoid. The penultimate dense activation is
the stream's exported feature vector.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import nn
from .errors import DataError, TrainingError

PAD_INDEX = 0
UNK_INDEX = 1
_PRINTABLE_ASCII = [chr(c) for c in range(32, 127)]


@dataclass
class CharCnnConfig:
    max_len: int = 160
    embed_dim: int = 32
    filter_widths: tuple[int, ...] = (3, 5, 7)
    filters_per_width: int = 64
    hidden: int = 128
    dropout: float = 0.3
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 10
    batch_size: int = 64

    def __post_init__(self):
        if self.max_len <= max(self.filter_widths):
            raise DataError(
                f"max_len {self.max_len} must exceed the widest filter "
                f"{max(self.filter_widths)}"
            )


@dataclass
class Charset:
    """Ordered character vocabulary; indices 0 and 1 are PAD and UNK."""

    chars: tuple[str, ...]  # characters at indices 2..

    def __post_init__(self):
        self._index = {c: i + 2 for i, c in enumerate(self.chars)}

    @property
    def size(self) -> int:
        return len(self.chars) + 2

    def index(self, char: str) -> int:
        return self._index.get(char, UNK_INDEX)

    def fingerprint(self) -> str:
        payload = json.dumps(list(self.chars), ensure_ascii=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_charset(training_texts: Iterable[str], extra_non_ascii: int = 64) -> Charset:
    """Printable ASCII plus the most frequent non-ASCII training codepoints
    (frequency ties break toward the lower codepoint)."""
    counts: Counter[str] = Counter()
    for text in training_texts:
        for ch in text:
            if ord(ch) > 126:
                counts[ch] += 1
    extras = sorted(counts, key=lambda c: (-counts[c], ord(c)))[:extra_non_ascii]
    return Charset(tuple(_PRINTABLE_ASCII) + tuple(extras))


def encode_chars(text: str, max_len: int, charset: Charset) -> np.ndarray:
    """First ``max_len`` codepoints as indices, right-padded with PAD."""
    seq = np.full(max_len, PAD_INDEX, dtype=np.int64)
    for i, ch in enumerate(text[:max_len]):
        seq[i] = charset.index(ch)
    return seq


def encode_chars_batch(texts: Sequence[str], max_len: int, charset: Charset) -> np.ndarray:
    return np.stack([encode_chars(t, max_len, charset) for t in texts]) if texts else np.empty(
        (0, max_len), dtype=np.int64
    )


class CharCnnModel:
    stream_id = "CHAR"
    kind = "CHARCNN"

    def __init__(self, config: CharCnnConfig, charset: Charset, params: nn.Params | None = None):
        self.config = config
        self.charset = charset
        self.params = params if params is not None else {}
        self.history: list[float] = []

    @property
    def feature_dim(self) -> int:
        return self.config.hidden

    def init_params(self, rng: np.random.Generator) -> None:
        c = self.config
        V = self.charset.size
        p: nn.Params = {"emb": rng.standard_normal((V, c.embed_dim)) * 0.1}
        for w in c.filter_widths:
            fan_in = w * c.embed_dim
            p[f"conv_w{w}"] = rng.standard_normal((fan_in, c.filters_per_width)) * np.sqrt(
                2.0 / fan_in
            )
            p[f"conv_b{w}"] = np.zeros(c.filters_per_width)
        total_filters = len(c.filter_widths) * c.filters_per_width
        p["hid_w"] = rng.standard_normal((total_filters, c.hidden)) * np.sqrt(2.0 / total_filters)
        p["hid_b"] = np.zeros(c.hidden)
        p["out_w"] = rng.standard_normal(c.hidden) * np.sqrt(1.0 / c.hidden)
        p["out_b"] = np.zeros(())
        self.params = p

    def _forward(self, X: np.ndarray, train: bool, rng: np.random.Generator | None):
        c, p = self.config, self.params
        E = p["emb"][X]  # (B, L, D)
        pooled = []
        caches = {}
        for w in c.filter_widths:
            Z, win = nn.conv1d_forward(E, p[f"conv_w{w}"], p[f"conv_b{w}"], w)
            A = nn.relu(Z)
            M, amax = nn.global_max_pool(A)
            pooled.append(M)
            caches[w] = (Z, win, A.shape, amax)
        M = np.concatenate(pooled, axis=1)
        hpre = M @ p["hid_w"] + p["hid_b"]
        H = nn.relu(hpre)
        if train:
            mask = nn.dropout_mask(H.shape, c.dropout, rng)
        else:
            mask = 1.0
        Hd = H * mask
        z = Hd @ p["out_w"] + p["out_b"]
        return z, {"X": X, "E": E, "conv": caches, "M": M, "hpre": hpre, "H": H, "mask": mask, "Hd": Hd}

    def loss(self, X: np.ndarray, y: np.ndarray, params: nn.Params | None = None) -> float:
        """Dropout-free loss; used directly by the finite-difference checks."""
        saved = self.params
        if params is not None:
            self.params = params
        try:
            z, _ = self._forward(X, train=False, rng=None)
            loss, _ = nn.bce_with_logits(z, y)
            return loss
        finally:
            self.params = saved

    def loss_and_grads(self, X, y, train=True, rng=None):
        c, p = self.config, self.params
        z, cache = self._forward(X, train=train, rng=rng)
        loss, dz = nn.bce_with_logits(z, y)

        grads: nn.Params = {}
        grads["out_w"] = cache["Hd"].T @ dz
        grads["out_b"] = np.asarray(dz.sum())
        dHd = np.outer(dz, p["out_w"])
        dH = dHd * cache["mask"]
        dhpre = dH * (cache["hpre"] > 0)
        grads["hid_w"] = cache["M"].T @ dhpre
        grads["hid_b"] = dhpre.sum(axis=0)
        dM = dhpre @ p["hid_w"].T

        dE = np.zeros_like(cache["E"])
        offset = 0
        for w in c.filter_widths:
            Z, win, a_shape, amax = cache["conv"][w]
            dMw = dM[:, offset : offset + c.filters_per_width]
            offset += c.filters_per_width
            dA = nn.global_max_pool_backward(dMw, amax, a_shape)
            dZ = dA * (Z > 0)
            dEw, dWc, dbc = nn.conv1d_backward(dZ, win, p[f"conv_w{w}"], cache["E"].shape, w)
            dE += dEw
            grads[f"conv_w{w}"] = dWc
            grads[f"conv_b{w}"] = dbc

        demb = np.zeros_like(p["emb"])
        np.add.at(demb, cache["X"], dE)
        grads["emb"] = demb
        return loss, grads

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z, _ = self._forward(X, train=False, rng=None)
        return nn.sigmoid(z)

    def features(self, X: np.ndarray) -> np.ndarray:
        """Penultimate dense activation; deterministic (dropout disabled)."""
        _, cache = self._forward(X, train=False, rng=None)
        return cache["H"]


def train_charcnn(
    sequences: np.ndarray,
    y: Sequence[int],
    config: CharCnnConfig,
    charset: Charset,
    seed: int = 0,
) -> CharCnnModel:
    """Train with Adam + binary cross-entropy; history[0] is the initial loss."""
    y = np.asarray(y, dtype=np.float64)
    if len(sequences) != len(y):
        raise DataError(f"sequences and labels length mismatch: {len(sequences)} != {len(y)}")
    if len(np.unique(y)) < 2:
        raise TrainingError("need both classes to train the char CNN")
    if sequences.shape[1] != config.max_len:
        raise DataError(
            f"sequence length {sequences.shape[1]} does not match max_len {config.max_len}"
        )

    rng = np.random.default_rng(seed)
    model = CharCnnModel(config, charset)
    model.init_params(rng)
    opt = nn.Adam(model.params, lr=config.lr, beta1=config.beta1, beta2=config.beta2)

    model.history.append(model.loss(sequences, y))
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(sequences[idx], y[idx], train=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingError(f"char CNN loss went non-finite at step {opt.t + 1}")
            opt.step(model.params, grads)
            epoch_losses.append(loss)
        model.history.append(float(np.mean(epoch_losses)))

    model.params = nn.snap_float32(model.params)
    return model
