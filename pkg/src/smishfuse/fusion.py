"""Stream fusion: per-stream truncated SVD to a common width, fixed-order
concatenation, and an attention-gated MLP classifier.

Each stream's feature matrix is mean-centered and reduced to ``k`` dimensions
with a truncated SVD fit on training features only (streams whose native
dimension is already <= k pass through centered and zero-padded). At fusion
time every reduced block gets a scalar attention score ``s_i = w_i . x_i +
b_i``; scores of the active streams go through a softmax and each block is
rescaled by ``n_active * alpha_i`` before entering the MLP, so uniform
attention reproduces the ungated input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import nn
from .errors import DataError, TrainingError
from .tfidf import SparseFeatureVector

STREAM_ORDER = ("SEMANTIC", "STRUCTURAL", "CHAR", "CONTEXTUAL")


def _as_dense(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.todense(), dtype=np.float64)
    if isinstance(X, SparseFeatureVector):
        return X.to_dense()
    arr = np.asarray(X, dtype=np.float64)
    return arr


@dataclass
class SvdProjection:
    """Truncated SVD of a centered stream feature matrix.

    ``components`` has orthonormal rows (right singular vectors, one sign
    convention: each row's largest-magnitude entry is non-negative).
    ``passthrough`` marks streams whose native dimension was already <= k;
    their components are the identity and ``singular_values`` is empty.
    """

    stream_id: str
    k: int
    train_mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    passthrough: bool = False

    def __post_init__(self):
        self.train_mean = np.asarray(self.train_mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.singular_values = np.asarray(self.singular_values, dtype=np.float64)
        if self.components.shape[1] != self.train_mean.shape[0]:
            raise DataError(
                f"components width {self.components.shape[1]} does not match "
                f"mean dimension {self.train_mean.shape[0]}"
            )
        if np.any(np.diff(self.singular_values) > 0) or np.any(self.singular_values < 0):
            raise DataError("singular values must be non-negative and non-increasing")

    @property
    def native_dim(self) -> int:
        return self.train_mean.shape[0]

    def project(self, X) -> np.ndarray:
        """Reduce (d,) or (N, d) features to width k (zero-padded if needed)."""
        sparse = sp.issparse(X)
        if not sparse:
            X = _as_dense(X)
            single = X.ndim == 1
            if single:
                X = X[None, :]
        else:
            single = False
        if X.shape[1] != self.native_dim:
            raise DataError(
                f"stream {self.stream_id}: feature dimension {X.shape[1]} does "
                f"not match projection dimension {self.native_dim}"
            )
        if sparse:
            core = np.asarray(X @ self.components.T) - self.train_mean @ self.components.T
        else:
            core = (X - self.train_mean) @ self.components.T
        if core.shape[1] < self.k:
            out = np.zeros((X.shape[0], self.k))
            out[:, : core.shape[1]] = core
        else:
            out = core
        return out[0] if single else out


_EXACT_SVD_MAX_DIM = 512


def _randomized_centered_svd(
    X, mean: np.ndarray, k: int, seed: int = 0, oversample: int = 10, iters: int = 7
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k singular values / right vectors of (X - mean) without ever
    materialising the dense centered matrix (X may be sparse)."""
    n, d = X.shape
    r = min(k + oversample, min(n, d))
    rng = np.random.default_rng(seed)
    ones = np.ones(n)

    def center_mm(M):  # (X - 1 mean^T) @ M
        return X @ M - np.outer(ones, mean @ M)

    def center_rmm(M):  # (X - 1 mean^T).T @ M
        return X.T @ M - np.outer(mean, ones @ M)

    Y = center_mm(rng.standard_normal((d, r)))
    Q, _ = np.linalg.qr(Y)
    for _ in range(iters):
        Q, _ = np.linalg.qr(center_rmm(Q))
        Q, _ = np.linalg.qr(center_mm(Q))
    B = center_rmm(Q).T  # (r, d)
    _, s, vt = np.linalg.svd(B, full_matrices=False)
    return s[:k], vt[:k]


def fit_svd(X, k: int, stream_id: str) -> SvdProjection:
    """Fit a rank-k truncated SVD of the centered matrix (requires k <= min(N, d)).

    Uses exact LAPACK SVD when min(N, d) <= 512 and a deterministic randomized
    power iteration (seeded, 7 iterations, 10 oversamples) above that.
    """
    if not sp.issparse(X):
        X = _as_dense(X)
        if X.ndim != 2:
            raise DataError("SVD input must be a 2-D feature matrix")
    n, d = X.shape
    if k < 1 or k > min(n, d):
        raise DataError(
            f"stream {stream_id}: k={k} must satisfy 1 <= k <= min(n={n}, d={d})"
        )
    mean = np.asarray(X.mean(axis=0)).ravel()
    if min(n, d) <= _EXACT_SVD_MAX_DIM:
        _, s, vt = np.linalg.svd(_as_dense(X) - mean, full_matrices=False)
        s, components = s[:k].copy(), vt[:k].copy()
    else:
        s, components = _randomized_centered_svd(X, mean, k)
        components = components.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return SvdProjection(
        stream_id=stream_id,
        k=k,
        train_mean=mean,
        components=components,
        singular_values=s,
    )


def fit_projection(X, k: int, stream_id: str) -> SvdProjection:
    """SVD when the stream is wider than k; centered pass-through otherwise."""
    if not sp.issparse(X):
        X = _as_dense(X)
    d = X.shape[1]
    if d <= k:
        return SvdProjection(
            stream_id=stream_id,
            k=k,
            train_mean=np.asarray(X.mean(axis=0)).ravel(),
            components=np.eye(d),
            singular_values=np.empty(0),
            passthrough=True,
        )
    return fit_svd(X, k, stream_id)


def fuse(blocks: Sequence[tuple[str, np.ndarray]], k: int) -> np.ndarray:
    """Concatenate reduced blocks, enforcing the pinned stream order."""
    names = tuple(name for name, _ in blocks)
    if names != STREAM_ORDER:
        raise DataError(f"streams must arrive in order {STREAM_ORDER}, got {names}")
    parts = []
    for name, vec in blocks:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (k,):
            raise DataError(f"stream {name}: block shape {vec.shape} != ({k},)")
        parts.append(vec)
    return np.concatenate(parts)


@dataclass
class FusionConfig:
    k: int = 64
    hidden: tuple[int, ...] = (256, 64)
    dropout: float = 0.3
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 30
    batch_size: int = 64
    threshold: float = 0.5

    def __post_init__(self):
        if not self.hidden:
            raise DataError("fusion MLP needs at least one hidden layer")
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold {self.threshold} must lie in (0, 1)")


class FusionModel:
    """Attention-gated MLP over the concatenated stream blocks."""

    def __init__(
        self,
        config: FusionConfig,
        params: nn.Params | None = None,
        active: Sequence[bool] | None = None,
    ):
        self.config = config
        self.params = params if params is not None else {}
        self.active = (
            np.asarray(active, dtype=bool)
            if active is not None
            else np.ones(len(STREAM_ORDER), dtype=bool)
        )
        if self.active.shape != (len(STREAM_ORDER),) or not self.active.any():
            raise DataError("active mask must cover all streams and keep at least one on")
        self.history: list[float] = []

    @property
    def n_streams(self) -> int:
        return len(STREAM_ORDER)

    def init_params(self, rng: np.random.Generator) -> None:
        c = self.config
        p: nn.Params = {
            "gate_w": rng.standard_normal((self.n_streams, c.k)) * 0.01,
            "gate_b": np.zeros(self.n_streams),
        }
        dims = [self.n_streams * c.k, *c.hidden]
        for i in range(len(c.hidden)):
            p[f"W{i}"] = rng.standard_normal((dims[i], dims[i + 1])) * np.sqrt(2.0 / dims[i])
            p[f"b{i}"] = np.zeros(dims[i + 1])
        p["out_w"] = rng.standard_normal(dims[-1]) * np.sqrt(1.0 / dims[-1])
        p["out_b"] = np.zeros(())
        self.params = p

    def _attention(self, blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (alphas (B, S), gated input (B, S*k))."""
        p = self.params
        scores = np.einsum("bsk,sk->bs", blocks, p["gate_w"]) + p["gate_b"]
        scores = np.where(self.active, scores, -np.inf)
        shifted = scores - scores.max(axis=1, keepdims=True)
        exps = np.exp(shifted)
        alphas = exps / exps.sum(axis=1, keepdims=True)
        n_active = int(self.active.sum())
        scaled = blocks * (n_active * alphas)[:, :, None]
        return alphas, scaled.reshape(blocks.shape[0], -1)

    def _forward(self, blocks: np.ndarray, train: bool, rng: np.random.Generator | None):
        c, p = self.config, self.params
        alphas, x = self._attention(blocks)
        cache = {"blocks": blocks, "alphas": alphas, "x": x, "layers": []}
        h = x
        for i in range(len(c.hidden)):
            pre = h @ p[f"W{i}"] + p[f"b{i}"]
            act = nn.relu(pre)
            mask = nn.dropout_mask(act.shape, c.dropout, rng) if train else 1.0
            out = act * mask
            cache["layers"].append({"inp": h, "pre": pre, "mask": mask, "out": out})
            h = out
        z = h @ p["out_w"] + p["out_b"]
        cache["h_last"] = h
        return z, cache

    def loss(self, blocks: np.ndarray, y: np.ndarray, params: nn.Params | None = None) -> float:
        saved = self.params
        if params is not None:
            self.params = params
        try:
            z, _ = self._forward(blocks, train=False, rng=None)
            loss, _ = nn.bce_with_logits(z, y)
            return loss
        finally:
            self.params = saved

    def loss_and_grads(self, blocks, y, train=True, rng=None):
        c, p = self.config, self.params
        z, cache = self._forward(blocks, train=train, rng=rng)
        loss, dz = nn.bce_with_logits(z, y)

        grads: nn.Params = {
            "out_w": cache["h_last"].T @ dz,
            "out_b": np.asarray(dz.sum()),
        }
        dh = np.outer(dz, p["out_w"])
        for i in reversed(range(len(c.hidden))):
            layer = cache["layers"][i]
            dact = dh * layer["mask"]
            dpre = dact * (layer["pre"] > 0)
            grads[f"W{i}"] = layer["inp"].T @ dpre
            grads[f"b{i}"] = dpre.sum(axis=0)
            dh = dpre @ p[f"W{i}"].T

        B, S, k = cache["blocks"].shape
        dscaled = dh.reshape(B, S, k)
        n_active = int(self.active.sum())
        alphas = cache["alphas"]
        dalpha = n_active * np.einsum("bsk,bsk->bs", dscaled, cache["blocks"])
        dscores = alphas * (dalpha - (dalpha * alphas).sum(axis=1, keepdims=True))
        grads["gate_w"] = np.einsum("bs,bsk->sk", dscores, cache["blocks"])
        grads["gate_b"] = dscores.sum(axis=0)
        return loss, grads

    def predict(self, blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (probabilities (B,), attention weights (B, S))."""
        blocks = np.asarray(blocks, dtype=np.float64)
        single = blocks.ndim == 2
        if single:
            blocks = blocks[None, :, :]
        if blocks.shape[1:] != (self.n_streams, self.config.k):
            raise DataError(
                f"fusion input shape {blocks.shape[1:]} != "
                f"({self.n_streams}, {self.config.k})"
            )
        z, cache = self._forward(blocks, train=False, rng=None)
        probs = nn.sigmoid(z)
        alphas = cache["alphas"]
        return (probs[0], alphas[0]) if single else (probs, alphas)


def train_fusion(
    blocks: np.ndarray,
    y: Sequence[int],
    config: FusionConfig,
    seed: int = 0,
    active: Sequence[bool] | None = None,
) -> FusionModel:
    """Adam + binary cross-entropy on (N, n_streams, k) reduced blocks."""
    blocks = np.asarray(blocks, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if blocks.ndim != 3 or blocks.shape[1:] != (len(STREAM_ORDER), config.k):
        raise DataError(
            f"expected blocks of shape (N, {len(STREAM_ORDER)}, {config.k}), got {blocks.shape}"
        )
    if len(blocks) != len(y):
        raise DataError(f"blocks and labels length mismatch: {len(blocks)} != {len(y)}")
    if len(np.unique(y)) < 2:
        raise TrainingError("need both classes to train fusion")

    rng = np.random.default_rng(seed)
    model = FusionModel(config, active=active)
    model.init_params(rng)
    opt = nn.Adam(model.params, lr=config.lr, beta1=config.beta1, beta2=config.beta2)

    model.history.append(model.loss(blocks, y))
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(blocks[idx], y[idx], train=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingError(f"fusion loss went non-finite at step {opt.t + 1}")
            opt.step(model.params, grads)
            epoch_losses.append(loss)
        model.history.append(float(np.mean(epoch_losses)))

    model.params = nn.snap_float32(model.params)
    return model
