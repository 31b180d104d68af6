"""Contextual phrase-embedding stream.

A pluggable encoder turns a (phrase-tagged) message into a pooled sentence
vector plus a per-token embedding matrix. The shipped default is a fully
deterministic hash encoder with no model downloads; a transformer adapter is
provided for environments that have torch + transformers installed. A small
convolutional head over the token matrices gives the stream a standalone
classifier; the pooled vector is what enters fusion.

Hash encoder construction (pinned so encodings are reproducible anywhere):

* token vector: ``sha256(token.encode("utf-8"))``, first 8 digest bytes read
  little-endian as a uint64 seed for ``np.random.Generator(PCG64(seed))``,
  draw ``standard_normal(embedding_dim)``, scale to unit L2 norm;
* pooled vector: ``P @ mean(token vectors)`` where ``P`` is
  ``standard_normal((dim, dim)) / sqrt(dim)`` drawn from a generator seeded
  the same way from the string ``"pooling:" + encoder_id``;
* a message with no tokens encodes as all zeros.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import nn
from .errors import DataError, EncoderUnavailableError, TrainingError
from .tokenize import tokenize

HASH_ENCODER_ID = "hash-v1"


@dataclass(frozen=True)
class ContextualEncoderSpec:
    encoder_id: str = HASH_ENCODER_ID
    embedding_dim: int = 64
    max_tokens: int = 48


class ContextualEncoder(Protocol):
    spec: ContextualEncoderSpec

    def encode(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (pooled (dim,), token matrix (n_tokens, dim))."""
        ...


def _seed_from(data: bytes) -> int:
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "little")


class HashTokenEncoder:
    """Deterministic dependency-free encoder (see module docstring)."""

    def __init__(self, spec: ContextualEncoderSpec):
        if not spec.encoder_id.startswith("hash"):
            raise DataError(f"hash encoder cannot serve encoder_id {spec.encoder_id!r}")
        self.spec = spec
        self._cache: dict[str, np.ndarray] = {}
        pool_rng = np.random.Generator(
            np.random.PCG64(_seed_from(f"pooling:{spec.encoder_id}".encode("utf-8")))
        )
        self.pooling = pool_rng.standard_normal(
            (spec.embedding_dim, spec.embedding_dim)
        ) / np.sqrt(spec.embedding_dim)

    def token_vector(self, token: str) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        rng = np.random.Generator(np.random.PCG64(_seed_from(token.encode("utf-8"))))
        v = rng.standard_normal(self.spec.embedding_dim)
        v = v / np.linalg.norm(v)
        self._cache[token] = v
        return v

    def encode(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        tokens = tokenize(text)[: self.spec.max_tokens]
        dim = self.spec.embedding_dim
        if not tokens:
            return np.zeros(dim), np.zeros((0, dim))
        matrix = np.stack([self.token_vector(t) for t in tokens])
        pooled = self.pooling @ matrix.mean(axis=0)
        return pooled, matrix


class TransformerEncoder:
    """Adapter over a Hugging Face masked LM; imports lazily so the package
    works without torch installed."""

    def __init__(self, spec: ContextualEncoderSpec):
        self.spec = spec
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"encoder_id {spec.encoder_id!r} needs the optional torch + "
                "transformers dependencies; install them or set encoder_id to "
                f"{HASH_ENCODER_ID!r} to use the built-in hash encoder"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(spec.encoder_id)
            self._model = AutoModel.from_pretrained(spec.encoder_id)
        except Exception as exc:  # model name typos, offline hubs, ...
            raise EncoderUnavailableError(
                f"could not load pretrained encoder {spec.encoder_id!r}: {exc}; "
                f"set encoder_id to {HASH_ENCODER_ID!r} to use the built-in "
                "hash encoder"
            ) from exc
        self._model.eval()

    def encode(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        import torch

        enc = self._tokenizer(
            text, return_tensors="pt", truncation=True, max_length=self.spec.max_tokens
        )
        with torch.no_grad():
            hidden = self._model(**enc).last_hidden_state[0]
        matrix = hidden.numpy().astype(np.float64)
        return matrix[0].copy(), matrix


def build_encoder(spec: ContextualEncoderSpec) -> ContextualEncoder:
    if spec.encoder_id.startswith("hash"):
        return HashTokenEncoder(spec)
    return TransformerEncoder(spec)


def encode_pooled_batch(encoder: ContextualEncoder, texts: Sequence[str]) -> np.ndarray:
    dim = encoder.spec.embedding_dim
    if not texts:
        return np.empty((0, dim))
    return np.stack([encoder.encode(t)[0] for t in texts])


def encode_token_batch(encoder: ContextualEncoder, texts: Sequence[str]) -> np.ndarray:
    """Token matrices zero-padded/truncated to (len(texts), max_tokens, dim)."""
    spec = encoder.spec
    out = np.zeros((len(texts), spec.max_tokens, spec.embedding_dim))
    for i, text in enumerate(texts):
        _, matrix = encoder.encode(text)
        n = min(len(matrix), spec.max_tokens)
        if n:
            out[i, :n] = matrix[:n]
    return out


@dataclass
class ConvHeadConfig:
    filter_widths: tuple[int, ...] = (2, 3)
    filters_per_width: int = 32
    dropout: float = 0.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 15
    batch_size: int = 64


class ConvHeadModel:
    """Convolutional classifier over padded token matrices."""

    stream_id = "CONTEXTUAL"
    kind = "CONV_HEAD"

    def __init__(
        self,
        config: ConvHeadConfig,
        spec: ContextualEncoderSpec,
        params: nn.Params | None = None,
    ):
        if spec.max_tokens <= max(config.filter_widths):
            raise DataError(
                f"max_tokens {spec.max_tokens} must exceed the widest filter "
                f"{max(config.filter_widths)}"
            )
        self.config = config
        self.spec = spec
        self.params = params if params is not None else {}
        self.history: list[float] = []

    def init_params(self, rng: np.random.Generator) -> None:
        c, dim = self.config, self.spec.embedding_dim
        p: nn.Params = {}
        for w in c.filter_widths:
            fan_in = w * dim
            p[f"conv_w{w}"] = rng.standard_normal((fan_in, c.filters_per_width)) * np.sqrt(
                2.0 / fan_in
            )
            p[f"conv_b{w}"] = np.zeros(c.filters_per_width)
        total = len(c.filter_widths) * c.filters_per_width
        p["out_w"] = rng.standard_normal(total) * np.sqrt(1.0 / total)
        p["out_b"] = np.zeros(())
        self.params = p

    def _forward(self, X: np.ndarray, train: bool, rng: np.random.Generator | None):
        c, p = self.config, self.params
        pooled = []
        caches = {}
        for w in c.filter_widths:
            Z, win = nn.conv1d_forward(X, p[f"conv_w{w}"], p[f"conv_b{w}"], w)
            A = nn.relu(Z)
            M, amax = nn.global_max_pool(A)
            pooled.append(M)
            caches[w] = (Z, win, A.shape, amax)
        M = np.concatenate(pooled, axis=1)
        if train:
            mask = nn.dropout_mask(M.shape, c.dropout, rng)
        else:
            mask = 1.0
        Md = M * mask
        z = Md @ p["out_w"] + p["out_b"]
        return z, {"conv": caches, "M": M, "mask": mask, "Md": Md}

    def loss(self, X: np.ndarray, y: np.ndarray, params: nn.Params | None = None) -> float:
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
        grads: nn.Params = {
            "out_w": cache["Md"].T @ dz,
            "out_b": np.asarray(dz.sum()),
        }
        dMd = np.outer(dz, p["out_w"])
        dM = dMd * cache["mask"]
        offset = 0
        for w in c.filter_widths:
            Z, win, a_shape, amax = cache["conv"][w]
            dMw = dM[:, offset : offset + c.filters_per_width]
            offset += c.filters_per_width
            dA = nn.global_max_pool_backward(dMw, amax, a_shape)
            dZ = dA * (Z > 0)
            _, dWc, dbc = nn.conv1d_backward(dZ, win, p[f"conv_w{w}"], X.shape, w)
            grads[f"conv_w{w}"] = dWc
            grads[f"conv_b{w}"] = dbc
        return loss, grads

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z, _ = self._forward(X, train=False, rng=None)
        return nn.sigmoid(z)


def train_contextual_head(
    token_matrices: np.ndarray,
    y: Sequence[int],
    config: ConvHeadConfig,
    spec: ContextualEncoderSpec,
    seed: int = 0,
) -> ConvHeadModel:
    y = np.asarray(y, dtype=np.float64)
    if len(token_matrices) != len(y):
        raise DataError(
            f"token matrices and labels length mismatch: {len(token_matrices)} != {len(y)}"
        )
    if len(np.unique(y)) < 2:
        raise TrainingError("need both classes to train the contextual head")

    rng = np.random.default_rng(seed)
    model = ConvHeadModel(config, spec)
    model.init_params(rng)
    opt = nn.Adam(model.params, lr=config.lr, beta1=config.beta1, beta2=config.beta2)

    model.history.append(model.loss(token_matrices, y))
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(token_matrices[idx], y[idx], train=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingError(f"contextual head loss went non-finite at step {opt.t + 1}")
            opt.step(model.params, grads)
            epoch_losses.append(loss)
        model.history.append(float(np.mean(epoch_losses)))

    model.params = nn.snap_float32(model.params)
    return model
