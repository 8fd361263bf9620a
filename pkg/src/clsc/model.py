"""Softmax classifier, parameter container and the full training objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .encoder import EncoderParams, encode, encode_backward, init_encoder
from .exceptions import ValidationError
from .graph import build_graph, graph_backward, propagate
from .hierarchy import Batch
from .loss import clsc_forward, clsc_grad_H

__all__ = [
    "ClassifierParams",
    "ModelParams",
    "LossTerms",
    "softmax",
    "classify",
    "supervision_loss",
    "total_loss",
    "init_model",
    "objective",
    "predict_proba",
]


@dataclass
class ClassifierParams:
    W: np.ndarray  # (K, d_z)
    b: np.ndarray  # (K,)

    def copy(self):
        return ClassifierParams(self.W.copy(), self.b.copy())


@dataclass
class ModelParams:
    encoder: EncoderParams
    classifier: ClassifierParams

    def arrays(self) -> Dict[str, np.ndarray]:
        """Named references to every parameter array (mutations propagate)."""
        out = {"attn_w": self.encoder.attn_w}
        for k, (W, b) in enumerate(self.encoder.layers):
            out[f"q{k}.W"] = W
            out[f"q{k}.b"] = b
        out["clf.W"] = self.classifier.W
        out["clf.b"] = self.classifier.b
        return out

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "ModelParams":
        n = sum(1 for k in arrays if k.startswith("q") and k.endswith(".W"))
        try:
            layers = [(np.asarray(arrays[f"q{k}.W"], float), np.asarray(arrays[f"q{k}.b"], float)) for k in range(n)]
            params = cls(
                EncoderParams(np.asarray(arrays["attn_w"], float), layers),
                ClassifierParams(np.asarray(arrays["clf.W"], float), np.asarray(arrays["clf.b"], float)),
            )
        except KeyError as exc:
            raise ValidationError(f"missing parameter tensor {exc}") from None
        params.encoder.check()
        if params.classifier.W.shape[1] != params.encoder.d_z:
            raise ValidationError("classifier input width does not match encoder output")
        return params

    def copy(self) -> "ModelParams":
        return ModelParams(self.encoder.copy(), self.classifier.copy())

    @staticmethod
    def is_weight(name: str) -> bool:
        return not name.endswith(".b")


@dataclass
class LossTerms:
    sup: float
    clsc: Optional[float]
    l2: float
    total: float
    n_clean: int


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def classify(params: ClassifierParams, z: np.ndarray) -> np.ndarray:
    """Type posterior ``softmax(W z + b)``; works on one vector or a row stack."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != params.W.shape[1]:
        raise ValidationError(f"z has width {z.shape[-1]}, classifier expects {params.W.shape[1]}")
    return softmax(z @ params.W.T + params.b)


def _supervision(params: ClassifierParams, Z, M, clean):
    """L_sup over clean rows plus its gradients (dW, db, dZ)."""
    idx = np.flatnonzero(clean)
    dW = np.zeros_like(params.W)
    db = np.zeros_like(params.b)
    dZ = np.zeros_like(Z)
    if idx.size == 0:
        return 0.0, dW, db, dZ
    Zc = Z[idx]
    y = M[idx]
    p = classify(params, Zc)
    target = (y * np.log(p, where=y > 0, out=np.zeros_like(p))).sum(axis=1)
    loss = -float(target.sum()) / idx.size
    g = (p - y) / idx.size
    dW = g.T @ Zc
    db = g.sum(axis=0)
    dZ[idx] = g @ params.W
    return loss, dW, db, dZ


def supervision_loss(params: ClassifierParams, Z: np.ndarray, batch: Batch) -> float:
    """Cross-entropy against the single terminal type of each clean sample.

    Noisy samples are ignored; a batch without clean samples scores 0.
    """
    return _supervision(params, np.asarray(Z, float), batch.M, batch.clean_flags)[0]


def total_loss(sup: float, clsc: float, lambda_clsc: float, l2: float = 0.0, lambda_l2: float = 0.0) -> float:
    """``sup + lambda_clsc * clsc (+ lambda_l2 * ||weights||^2)``."""
    out = sup
    if lambda_clsc:
        out += lambda_clsc * clsc
    if lambda_l2:
        out += lambda_l2 * l2
    return out


def init_model(d_w, d_h, K, d_z=16, n_layers=1, hidden=32, rng=None) -> ModelParams:
    rng = np.random.default_rng(rng)
    enc = init_encoder(d_w, d_h, d_z, n_layers=n_layers, hidden=hidden, rng=rng)
    bound = 1.0 / np.sqrt(d_z)
    clf = ClassifierParams(rng.uniform(-bound, bound, size=(K, d_z)), np.zeros(K))
    return ModelParams(enc, clf)


def predict_proba(params: ModelParams, batch: Batch) -> np.ndarray:
    Z = encode(params.encoder, batch).Z
    return classify(params.classifier, Z)


def objective(
    params: ModelParams,
    batch: Batch,
    lambda_clsc: float = 0.0,
    S_m: int = 1,
    S_lp: int = 200,
    lambda_l2: float = 0.0,
    Phi: Optional[np.ndarray] = None,
    lp_seed=None,
    zero_diagonal: bool = False,
):
    """Total loss and gradients for one batch.

    When ``lambda_clsc > 0`` the label posterior is obtained by propagation on
    the current embeddings (unless ``Phi`` is supplied) and held fixed for
    differentiation. With ``lambda_clsc == 0`` only clean rows are encoded,
    so noisy samples cannot affect the result in any way.

    Returns
    -------
    terms : LossTerms
    grads : dict
        Same keys as ``params.arrays()``.
    extras : dict
        ``Z`` (embeddings of the rows that were encoded), ``Phi`` and
        ``dZ`` (gradient of the total loss w.r.t. ``Z``).
    """
    use_clsc = lambda_clsc > 0
    if not use_clsc:
        batch = batch.take(np.flatnonzero(batch.clean_flags))

    n_clean = int(batch.clean_flags.sum())
    grads = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    extras = {"Z": None, "Phi": Phi, "dZ": None}
    clsc_value = None
    sup = 0.0

    if batch.B > 0:
        enc = encode(params.encoder, batch)
        Z = enc.Z
        sup, dW, db, dZ = _supervision(params.classifier, Z, batch.M, batch.clean_flags)
        grads["clf.W"] += dW
        grads["clf.b"] += db

        if use_clsc:
            g = build_graph(Z, zero_diagonal=zero_diagonal)
            if Phi is None:
                Phi = propagate(g, batch.M, S_lp=S_lp, seed=lp_seed).Phi
            terms = clsc_forward(g.H, Phi, S_m)
            clsc_value = terms.loss
            dZ = dZ + lambda_clsc * graph_backward(Z, g, clsc_grad_H(terms))

        eg = encode_backward(enc.tape, dZ)
        grads["attn_w"] += eg.attn_w
        for k, (gW, gb) in enumerate(eg.layers):
            grads[f"q{k}.W"] += gW
            grads[f"q{k}.b"] += gb
        extras.update(Z=Z, Phi=Phi, dZ=dZ)

    l2 = 0.0
    if lambda_l2:
        for name, arr in params.arrays().items():
            if ModelParams.is_weight(name):
                l2 += float(np.sum(arr * arr))
                grads[name] += 2.0 * lambda_l2 * arr

    total = total_loss(sup, clsc_value or 0.0, lambda_clsc, l2, lambda_l2)
    return LossTerms(sup=sup, clsc=clsc_value, l2=l2, total=total, n_clean=n_clean), grads, extras
