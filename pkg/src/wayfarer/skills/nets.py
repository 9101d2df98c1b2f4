"""Two-hidden-layer tanh MLP with hand-written backprop.

mlp_backward accumulates parameter gradients into a ParamVector-shaped
accumulator and returns the input gradient, which the bottleneck encoder
needs for the reparameterized latent path.
"""
from __future__ import annotations

import numpy as np

from .params import ParamVector


def mlp_depth(pv: ParamVector, prefix: str) -> int:
    depth = 0
    while f"{prefix}/W{depth + 1}" in pv.table:
        depth += 1
    return depth


def mlp_forward(pv: ParamVector, prefix: str, x: np.ndarray):
    """Returns (output, cache). tanh on all layers except the last."""
    acts = [x]
    h = x
    depth = mlp_depth(pv, prefix)
    for i in range(1, depth + 1):
        z = h @ pv.get(f"{prefix}/W{i}") + pv.get(f"{prefix}/b{i}")
        h = z if i == depth else np.tanh(z)
        acts.append(h)
    return acts[-1], acts


def mlp_backward(pv: ParamVector, prefix: str, cache: list, d_out: np.ndarray, grad: ParamVector) -> np.ndarray:
    depth = len(cache) - 1
    d = d_out
    for i in range(depth, 0, -1):
        h_in = cache[i - 1]
        if i != depth:
            d = d * (1.0 - cache[i] ** 2)
        gw = grad.get(f"{prefix}/W{i}")
        gw += h_in.T @ d
        gb = grad.get(f"{prefix}/b{i}")
        gb += d.sum(axis=0)
        d = d @ pv.get(f"{prefix}/W{i}").T
    return d


def log_softmax(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def softplus(y: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, y)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise stable binary cross-entropy; returns (loss, dloss/dz)."""
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return loss, sigmoid(z) - y
