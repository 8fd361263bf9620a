"""Experiment harness: noise-robustness sweep, Markov ablation, projections.

Every function returns flat result rows (``dict`` of scalars) so the output
can go straight to :func:`clsc.dataio.write_records`.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dataio import Dataset
from .encoder import encode
from .exceptions import ValidationError
from .hierarchy import MentionSample, TypeHierarchy, is_clean, pack_samples
from .model import ModelParams
from .train import TrainConfig, evaluate_params, train

__all__ = [
    "DEFAULT_SEEDS",
    "SWEEP_FRACTIONS",
    "subsample_clean",
    "run_cell",
    "noise_sweep",
    "ablation",
    "summarize",
    "embed",
    "compactness_ratio",
    "pca_2d",
    "project",
]

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
SWEEP_FRACTIONS = (0.25, 0.20, 0.15, 0.10, 0.05)


def _splits(dataset: Dataset, eval_split: str):
    train_set = dataset.split("train")
    eval_set = dataset.split(eval_split)
    if not train_set:
        raise ValidationError("dataset has no 'train' samples")
    if not eval_set:
        raise ValidationError(f"dataset has no '{eval_split}' samples")
    return train_set, eval_set


def subsample_clean(
    hierarchy: TypeHierarchy, samples: Sequence[MentionSample], fraction: float, seed: int
) -> List[MentionSample]:
    """Keep ``round(fraction * n_clean)`` clean samples and every noisy one.

    The selection depends only on ``(fraction, seed)`` and the original order
    of ``samples`` is preserved, so ``fraction=1`` returns the input unchanged.
    """
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    clean = np.array([is_clean(hierarchy, s) for s in samples], dtype=bool)
    clean_idx = np.flatnonzero(clean)
    n_keep = int(round(fraction * len(clean_idx)))
    rng = np.random.default_rng([seed, int(round(fraction * 1_000_000))])
    kept = set(rng.choice(clean_idx, size=n_keep, replace=False).tolist())
    out = [s for i, s in enumerate(samples) if not clean[i] or i in kept]
    if len(out) < 2:
        raise ValidationError(f"fraction {fraction} leaves {len(out)} training samples, need at least 2")
    return out


def run_cell(hierarchy, train_samples, eval_pool, config: TrainConfig) -> Tuple[dict, ModelParams]:
    """Train once and score the final parameters on ``eval_pool``."""
    report = train(train_samples, hierarchy, config)
    res = evaluate_params(report.params, hierarchy, eval_pool)
    return res.as_dict(), report.params


def noise_sweep(
    dataset: Dataset,
    config: TrainConfig,
    fractions: Iterable[float] = SWEEP_FRACTIONS,
    seeds: Iterable[int] = DEFAULT_SEEDS,
    eval_split: str = "test",
) -> List[dict]:
    """Train CLSC and the unregularized baseline on shrinking clean subsets.

    For each fraction and seed both methods see the same training subset
    and the same training seed. Returns one row per (fraction, method, seed).
    """
    if config.lambda_clsc <= 0:
        raise ValidationError("noise_sweep needs lambda_clsc > 0 for the CLSC arm")
    h = dataset.hierarchy
    train_set, eval_set = _splits(dataset, eval_split)
    eval_pool = pack_samples(h, eval_set)
    methods = (("clsc", config), ("baseline", config.replace(lambda_clsc=0.0)))
    rows = []
    for f in fractions:
        for seed in seeds:
            subset = subsample_clean(h, train_set, f, seed)
            n_clean = int(dataset.clean_mask(subset).sum())
            for name, cfg in methods:
                metrics, _ = run_cell(h, subset, eval_pool, cfg.replace(seed=seed))
                rows.append(
                    {"fraction": f, "method": name, "seed": seed, "n_train": len(subset), "n_clean": n_clean, **metrics}
                )
    return rows


def ablation(
    dataset: Dataset,
    config: TrainConfig,
    seeds: Iterable[int] = DEFAULT_SEEDS,
    eval_split: str = "test",
) -> Tuple[List[dict], List[dict]]:
    """One-step versus multi-step regularizer, on clean-only and clean+noisy data.

    Returns per-seed rows and a four-row summary (mean and std of strict
    accuracy) keyed by ``data`` and ``S_m``.
    """
    h = dataset.hierarchy
    train_set, eval_set = _splits(dataset, eval_split)
    clean = dataset.clean_mask(train_set)
    data = {"clean": [s for s, c in zip(train_set, clean) if c], "clean+noisy": train_set}
    if len(data["clean"]) < 2:
        raise ValidationError("ablation needs at least 2 clean training samples")
    eval_pool = pack_samples(h, eval_set)
    rows = []
    for data_name, samples in data.items():
        for S_m in (1, config.S_m):
            for seed in seeds:
                metrics, _ = run_cell(h, samples, eval_pool, config.replace(S_m=S_m, seed=seed))
                rows.append({"data": data_name, "S_m": S_m, "seed": seed, **metrics})
    return rows, summarize(rows, ("data", "S_m"))


def summarize(rows: Sequence[dict], keys: Sequence[str], metric: str = "strict_acc") -> List[dict]:
    """Mean and population std of ``metric`` grouped by ``keys``, in first-seen order."""
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r[metric])
    return [
        {**dict(zip(keys, k)), "mean": float(np.mean(v)), "std": float(np.std(v)), "n": len(v)}
        for k, v in groups.items()
    ]


def embed(params: ModelParams, hierarchy: TypeHierarchy, samples: Sequence[MentionSample]) -> np.ndarray:
    """Latent embeddings ``Z`` for ``samples``."""
    return encode(params.encoder, pack_samples(hierarchy, samples)).Z


def compactness_ratio(Z: np.ndarray, labels: Sequence[int]) -> float:
    """Mean intra-class over mean inter-class Euclidean pairwise distance.

    Lower values indicate tighter, better separated clusters.
    """
    Z = np.asarray(Z, dtype=float)
    labels = np.asarray(labels)
    if Z.ndim != 2 or len(Z) != len(labels):
        raise ValidationError("Z must be (n, d) with one label per row")
    sq = np.sum(Z * Z, axis=1)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T, 0.0))
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(Z), dtype=bool)
    intra, inter = D[same & off], D[~same]
    if intra.size == 0 or inter.size == 0:
        raise ValidationError("need at least one same-class pair and one cross-class pair")
    return float(intra.mean() / inter.mean())


def pca_2d(Z: np.ndarray) -> np.ndarray:
    """Project rows of ``Z`` onto their top two principal components.

    Component signs are fixed so the largest-magnitude loading is positive,
    which makes the output deterministic. One-dimensional input gets a zero
    second coordinate.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or len(Z) < 2:
        raise ValidationError("projection needs a 2-D array with at least 2 rows")
    X = Z - Z.mean(axis=0)
    _, _, Vt = np.linalg.svd(X, full_matrices=False)
    Vt = Vt[:2]
    flip = np.sign(Vt[np.arange(len(Vt)), np.abs(Vt).argmax(axis=1)])
    Vt = Vt * np.where(flip == 0, 1.0, flip)[:, None]
    out = X @ Vt.T
    if out.shape[1] < 2:
        out = np.hstack([out, np.zeros((len(out), 2 - out.shape[1]))])
    return out


def project(
    params: ModelParams, hierarchy: TypeHierarchy, samples: Sequence[MentionSample], Z: Optional[np.ndarray] = None
) -> List[dict]:
    """Rows ``(id, x, y, gold)`` of the 2-D projection of the embeddings."""
    if len(samples) < 2:
        raise ValidationError(f"projection needs at least 2 samples, got {len(samples)}")
    Z = embed(params, hierarchy, samples) if Z is None else Z
    xy = pca_2d(Z)
    return [
        {"id": s.id, "x": float(x), "y": float(y), "gold": "" if s.gold is None else hierarchy.types[s.gold]}
        for s, (x, y) in zip(samples, xy)
    ]
