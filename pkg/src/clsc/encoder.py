"""Mention feature extractor.

A sample is reduced to ``r = [mean(mention tokens); attention-pooled
context]`` and mapped through a ReLU MLP to its embedding ``z``. The
forward pass records a tape so :func:`encode_backward` can return exact
gradients without an autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import ValidationError
from .hierarchy import Batch

__all__ = [
    "EncoderParams",
    "EncodedBatch",
    "EncoderGrads",
    "average_mention",
    "attention_pool",
    "init_encoder",
    "encode",
    "encode_backward",
]


@dataclass
class EncoderParams:
    attn_w: np.ndarray
    layers: List[Tuple[np.ndarray, np.ndarray]]

    @property
    def d_h(self) -> int:
        return self.attn_w.shape[0]

    @property
    def d_in(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def d_z(self) -> int:
        return self.layers[-1][0].shape[0]

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.attn_w.copy(), [(W.copy(), b.copy()) for W, b in self.layers])

    def check(self):
        prev = self.d_in
        for k, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or W.shape[1] != prev or b.shape != (W.shape[0],):
                raise ValidationError(f"encoder layer {k} has inconsistent shapes {W.shape}, {b.shape}")
            prev = W.shape[0]
        for arr in [self.attn_w] + [a for layer in self.layers for a in layer]:
            if not np.all(np.isfinite(arr)):
                raise ValidationError("encoder parameters must be finite")


@dataclass
class EncodedBatch:
    Z: np.ndarray
    tape: dict


@dataclass
class EncoderGrads:
    attn_w: np.ndarray
    layers: List[Tuple[np.ndarray, np.ndarray]]
    features: np.ndarray  # dL/dr, (B, d_w + d_h); unused by the optimizer


def average_mention(mention_vecs) -> np.ndarray:
    """Arithmetic mean of the mention's token vectors."""
    arr = np.asarray(mention_vecs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError("mention_vecs must be a non-empty list of vectors")
    return arr.mean(axis=0)


def attention_pool(context_vecs, attn_w) -> np.ndarray:
    """Attention-weighted sum of context vectors.

    Scores are ``w . tanh(h_j)``, normalized with a softmax over positions.
    """
    H = np.asarray(context_vecs, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] == 0:
        raise ValidationError("context_vecs must be a non-empty list of vectors")
    scores = np.tanh(H) @ np.asarray(attn_w, dtype=np.float64)
    beta = np.exp(scores - scores.max())
    beta /= beta.sum()
    return beta @ H


def init_encoder(d_w, d_h, d_z, n_layers=1, hidden=32, rng=None) -> EncoderParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, zero biases."""
    rng = np.random.default_rng(rng)
    widths = [d_w + d_h] + [hidden] * n_layers + [d_z]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out)))
    bound = 1.0 / np.sqrt(d_h)
    return EncoderParams(rng.uniform(-bound, bound, size=d_h), layers)


def encode(params: EncoderParams, batch: Batch) -> EncodedBatch:
    """Embed every sample of ``batch``; also stores the result in ``batch.Z``."""
    C = batch.context
    if C.shape[2] != params.d_h or batch.d_in != params.d_in:
        raise ValidationError(
            f"batch features (d_w + d_h = {batch.d_in}, d_h = {C.shape[2]}) do not match "
            f"encoder (d_in = {params.d_in}, d_h = {params.d_h})"
        )
    mask = batch.context_mask
    tC = np.tanh(C)
    scores = np.where(mask, tC @ params.attn_w, -np.inf)
    beta = np.exp(scores - scores.max(axis=1, keepdims=True))
    beta /= beta.sum(axis=1, keepdims=True)
    r_c = np.einsum("bl,bld->bd", beta, C)

    x = np.concatenate([batch.mention_mean, r_c], axis=1)
    xs, pres = [x], []
    last = len(params.layers) - 1
    for k, (W, b) in enumerate(params.layers):
        pre = x @ W.T + b
        pres.append(pre)
        x = pre if k == last else np.maximum(pre, 0.0)
        xs.append(x)
    Z = x
    batch.Z = Z
    tape = {"C": C, "tC": tC, "beta": beta, "xs": xs, "pres": pres, "params": params, "d_w": batch.mention_mean.shape[1]}
    return EncodedBatch(Z=Z, tape=tape)


def encode_backward(tape: dict, dZ: np.ndarray) -> EncoderGrads:
    """Reverse pass of :func:`encode` for upstream gradient ``dZ``."""
    params = tape["params"]
    xs, pres = tape["xs"], tape["pres"]
    if dZ.shape != xs[-1].shape:
        raise ValidationError(f"dL/dZ has shape {dZ.shape}, expected {xs[-1].shape}")

    grads = [None] * len(params.layers)
    g = dZ
    for k in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[k]
        if k != len(params.layers) - 1:
            g = g * (pres[k] > 0)
        grads[k] = (g.T @ xs[k], g.sum(axis=0))
        g = g @ W

    d_w = tape["d_w"]
    g_rc = g[:, d_w:]
    beta = tape["beta"]
    g_beta = np.einsum("bd,bld->bl", g_rc, tape["C"])
    g_scores = beta * (g_beta - (beta * g_beta).sum(axis=1, keepdims=True))
    g_attn = np.einsum("bl,bld->d", g_scores, tape["tC"])
    return EncoderGrads(attn_w=g_attn, layers=grads, features=g)
