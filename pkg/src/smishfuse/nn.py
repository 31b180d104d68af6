"""Minimal neural-net primitives shared by the CNN streams and the fusion net.

Everything runs in float64 numpy with hand-written backward passes; the
finite-difference suite in the tests checks every analytic gradient. Models
keep parameters in plain name->array dicts so they can be flattened for
gradient checks and persisted as raw float arrays.
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits; returns (loss, dloss/dz)."""
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    dz = (sigmoid(z) - y) / len(z)
    return float(loss.mean()), dz


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv1d_forward(X: np.ndarray, W: np.ndarray, b: np.ndarray, width: int):
    """Valid 1-D convolution over the time axis.

    X: (B, T, D); W: (width*D, F); b: (F,). Returns pre-activation
    (B, T-width+1, F) plus the window tensor needed for the backward pass.
    """
    B, T, D = X.shape
    win = np.lib.stride_tricks.sliding_window_view(X, width, axis=1)  # (B, T', D, w)
    win = win.transpose(0, 1, 3, 2).reshape(B, T - width + 1, width * D)
    return win @ W + b, win


def conv1d_backward(dZ: np.ndarray, win: np.ndarray, W: np.ndarray, x_shape, width: int):
    """Gradients of a valid conv1d. Returns (dX, dW, db)."""
    B, T, D = x_shape
    Tw = T - width + 1
    dZ2 = dZ.reshape(B * Tw, -1)
    win2 = win.reshape(B * Tw, width * D)
    dW = win2.T @ dZ2
    db = dZ2.sum(axis=0)
    dwin = (dZ2 @ W.T).reshape(B, Tw, width, D)
    dX = np.zeros(x_shape)
    for j in range(width):
        dX[:, j : j + Tw, :] += dwin[:, :, j, :]
    return dX, dW, db


def global_max_pool(A: np.ndarray):
    """Max over the time axis of (B, T, F); returns (pooled, argmax)."""
    amax = A.argmax(axis=1)
    pooled = np.take_along_axis(A, amax[:, None, :], axis=1)[:, 0, :]
    return pooled, amax


def global_max_pool_backward(dP: np.ndarray, amax: np.ndarray, a_shape) -> np.ndarray:
    B, _, F = a_shape
    dA = np.zeros(a_shape)
    np.add.at(dA, (np.arange(B)[:, None], amax, np.arange(F)[None, :]), dP)
    return dA


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout mask; multiply activations by it during training."""
    if rate <= 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


class Adam:
    """Adam with bias correction; state is private to one training run."""

    def __init__(self, params: Params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * (g * g)
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def flatten_params(params: Params) -> tuple[np.ndarray, list[tuple[str, tuple]]]:
    """Concatenate parameters into one vector plus a shape spec to invert it."""
    spec = [(k, params[k].shape) for k in sorted(params)]
    flat = np.concatenate([params[k].ravel() for k, _ in spec]) if spec else np.empty(0)
    return flat, spec


def unflatten_params(flat: np.ndarray, spec: list[tuple[str, tuple]]) -> Params:
    params: Params = {}
    offset = 0
    for name, shape in spec:
        size = int(np.prod(shape)) if shape else 1
        params[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return params


def snap_float32(params: Params) -> Params:
    """Round parameters through float32 so persisted bundles are lossless."""
    return {k: v.astype(np.float32).astype(np.float64) for k, v in params.items()}
