"""Adam optimizer and the mini-batch training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .exceptions import NumericalError, ValidationError
from .hierarchy import Batch, MentionSample, TypeHierarchy, pack_samples
from .metrics import EvalResult, evaluate
from .model import ModelParams, init_model, objective, predict_proba

__all__ = [
    "AdamState",
    "adam_step",
    "TrainConfig",
    "EpochRecord",
    "TrainReport",
    "iter_batches",
    "train_step",
    "train",
    "predict",
    "evaluate_params",
]

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValidationError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, params


@dataclass
class TrainConfig:
    """Optimization and architecture settings.

    The propagation, Markov and regularizer-weight defaults follow the
    published OntoNotes configuration; batch size, network size and
    learning rate are scaled down to run on a laptop CPU. The shipped
    ``configs/desk.json`` profile raises ``lambda_clsc`` to the value picked
    on the synthetic benchmark's dev split.
    """

    lr: float = 0.01
    batch_size: int = 64
    S_lp: int = 200
    S_m: int = 8
    lambda_clsc: float = 2.0
    lambda_l2: float = 0.0
    epochs: int = 30
    seed: int = 0
    d_z: int = 16
    n_layers: int = 1
    hidden: int = 32
    zero_diagonal: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2")
        if self.S_lp < 1 or self.S_m < 1:
            raise ValidationError("S_lp and S_m must be >= 1")
        if self.lambda_clsc < 0 or self.lambda_l2 < 0:
            raise ValidationError("loss weights must be >= 0")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.d_z < 1 or self.n_layers < 0 or self.hidden < 1:
            raise ValidationError("invalid network dimensions")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **changes})

    def as_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    sup_loss: float
    clsc_loss: Optional[float]
    total_loss: float
    steps: int
    dev: Optional[EvalResult] = None


@dataclass
class TrainReport:
    config: TrainConfig
    epochs: List[EpochRecord]
    params: ModelParams
    best_params: ModelParams
    best_epoch: int

    def history(self) -> List[dict]:
        rows = []
        for r in self.epochs:
            row = {"epoch": r.epoch, "sup_loss": r.sup_loss, "clsc_loss": r.clsc_loss, "total_loss": r.total_loss}
            if r.dev is not None:
                row.update(r.dev.as_dict("dev_"))
            rows.append(row)
        return rows


def iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index chunks of ``batch_size``; a trailing singleton joins the previous chunk."""
    perm = rng.permutation(n)
    chunks = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def train_step(params: ModelParams, state: AdamState, batch: Batch, config: TrainConfig, lp_seed=None):
    """Forward, backward and one Adam update on ``batch``; returns the loss terms."""
    terms, grads, _ = objective(
        params,
        batch,
        lambda_clsc=config.lambda_clsc,
        S_m=config.S_m,
        S_lp=config.S_lp,
        lambda_l2=config.lambda_l2,
        lp_seed=lp_seed,
        zero_diagonal=config.zero_diagonal,
    )
    if not math.isfinite(terms.total):
        raise NumericalError(f"non-finite loss (sup={terms.sup}, clsc={terms.clsc})")
    # a batch with nothing to learn from leaves the optimizer untouched
    if terms.n_clean == 0 and not config.lambda_clsc and not config.lambda_l2:
        return terms
    adam_step(state, params.arrays(), grads, config.lr)
    return terms


def _as_pool(data, hierarchy) -> Batch:
    if isinstance(data, Batch):
        return data
    return pack_samples(hierarchy, data)


def predict(params: ModelParams, batch: Batch) -> np.ndarray:
    return predict_proba(params, batch).argmax(axis=1)


def evaluate_params(params: ModelParams, hierarchy: TypeHierarchy, data) -> EvalResult:
    pool = _as_pool(data, hierarchy)
    if np.any(pool.gold < 0):
        raise ValidationError("evaluation data must carry gold types")
    return evaluate(hierarchy, predict(params, pool), pool.gold)


def train(
    dataset: Union[Sequence[MentionSample], Batch],
    hierarchy: TypeHierarchy,
    config: TrainConfig,
    dev=None,
    params: Optional[ModelParams] = None,
) -> TrainReport:
    """Train encoder and classifier for ``config.epochs`` epochs.

    Each step encodes a shuffled batch, propagates labels on its similarity
    graph, and minimizes the clean-sample supervision loss plus the weighted
    clustering regularizer. When ``dev`` is given, the parameters of the
    epoch with the best dev strict accuracy are kept in ``best_params``.
    """
    pool = _as_pool(dataset, hierarchy)
    if pool.B < 2:
        raise ValidationError(f"training needs at least 2 samples, got {pool.B}")
    if pool.K != len(hierarchy):
        raise ValidationError("dataset mask width does not match the hierarchy")
    dev_pool = None if dev is None else _as_pool(dev, hierarchy)

    init_seq, shuffle_seq, lp_seq = np.random.SeedSequence(config.seed).spawn(3)
    if params is None:
        params = init_model(
            pool.mention_mean.shape[1],
            pool.context.shape[2],
            pool.K,
            d_z=config.d_z,
            n_layers=config.n_layers,
            hidden=config.hidden,
            rng=np.random.default_rng(init_seq),
        )
    shuffle_rng = np.random.default_rng(shuffle_seq)
    lp_rng = np.random.default_rng(lp_seq)
    state = AdamState()

    records = []
    best_params, best_epoch, best_score = params.copy(), 0, -1.0
    for epoch in range(1, config.epochs + 1):
        sums = np.zeros(3)
        n_clsc = 0
        chunks = iter_batches(pool.B, config.batch_size, shuffle_rng)
        for step, idx in enumerate(chunks):
            try:
                terms = train_step(params, state, pool.take(idx), config, lp_seed=lp_rng)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, step {step}: {exc}") from exc
            sums += (terms.sup, terms.clsc or 0.0, terms.total)
            n_clsc += terms.clsc is not None
        n = len(chunks)
        rec = EpochRecord(
            epoch=epoch,
            sup_loss=sums[0] / n,
            clsc_loss=sums[1] / n if n_clsc else None,
            total_loss=sums[2] / n,
            steps=n,
        )
        if dev_pool is not None:
            rec.dev = evaluate_params(params, hierarchy, dev_pool)
            if rec.dev.strict_acc > best_score:
                best_score, best_epoch, best_params = rec.dev.strict_acc, epoch, params.copy()
        log.debug("epoch %d: sup=%.4f clsc=%s total=%.4f", epoch, rec.sup_loss, rec.clsc_loss, rec.total_loss)
        records.append(rec)

    if dev_pool is None:
        best_params, best_epoch = params.copy(), config.epochs
    return TrainReport(config=config, epochs=records, params=params, best_params=best_params, best_epoch=best_epoch)
