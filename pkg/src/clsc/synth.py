"""Synthetic noisy-typing corpora.

Each terminal type owns a Gaussian center in mention space and one in
context space; a child's center is its parent's plus a smaller offset, so
siblings sit closer together than cousins. A sample draws a latent point
around its gold type's center, and its token vectors around that point.

A ``noise_rate`` fraction of mentions refer to entities carrying extra types
in the knowledge base: their candidate sets receive one or more distractor
paths. Such entities occur in different surroundings from single-type ones,
so their features come from a secondary mode of the gold type: its center
moved the fraction ``mode_shift`` of the way toward a fixed partner type
(0 gives a single mode per type). Dev and test mentions are drawn the same
way but carry clean labels, like manually annotated evaluation sets.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dataio import Dataset
from .exceptions import ValidationError
from .hierarchy import MentionSample, TypeHierarchy

__all__ = ["SynthConfig", "make_hierarchy", "generate"]


@dataclass
class SynthConfig:
    n_types: int = 4
    depth: int = 2
    n_parents: int = 2
    n_samples: int = 2000
    n_dev: int = 200
    n_test: int = 1000
    noise_rate: float = 0.3
    max_extra_paths: int = 2
    cluster_spread: float = 0.9
    center_scale: float = 0.7
    child_scale: float = 0.6
    mode_shift: float = 0.45
    token_noise: float = 0.5
    context_signal: float = 0.5
    mention_len: int = 2
    context_len: int = 8
    d_w: int = 8
    d_h: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_types < 2:
            raise ValidationError("n_types must be >= 2")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValidationError("noise_rate must lie in [0, 1]")
        if self.depth < 1 or self.n_parents < 1:
            raise ValidationError("depth and n_parents must be >= 1")
        if self.n_samples < 0 or self.n_dev < 0 or self.n_test < 0:
            raise ValidationError("sample counts must be >= 0")
        if self.max_extra_paths < 1:
            raise ValidationError("max_extra_paths must be >= 1")
        if min(self.d_w, self.d_h, self.mention_len, self.context_len) < 1:
            raise ValidationError("dimensions and lengths must be >= 1")
        if not 0.0 <= self.context_signal <= 1.0:
            raise ValidationError("context_signal must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)


def make_hierarchy(n_types: int, depth: int = 2, n_parents: int = 2) -> TypeHierarchy:
    """Tree with ``n_types`` leaves, all at ``depth``.

    Leaves are split as evenly as possible among ``n_parents`` top-level
    types; deeper levels split each group in two.
    """
    paths = []

    def build(prefix, leaves, level, width):
        if level == depth:
            for leaf in leaves:
                paths.append(f"{prefix}/t{leaf}")
            return
        groups = [g for g in np.array_split(np.asarray(leaves), min(width, len(leaves))) if len(g)]
        for gi, group in enumerate(groups):
            node = f"{prefix}/{'ABCDEFGHIJKLMNOPQRSTUVWXYZ'[gi % 26]}{gi // 26 or ''}" if level == 1 else f"{prefix}/g{gi}"
            paths.append(node)
            build(node, list(group), level + 1, 2)

    build("", list(range(n_types)), 1, n_parents)
    return TypeHierarchy.from_paths(paths)


def generate(cfg: SynthConfig) -> Dataset:
    """Draw train, dev and test mentions; fully determined by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    h = make_hierarchy(cfg.n_types, cfg.depth, cfg.n_parents)
    leaves = h.leaves()
    d_tot = cfg.d_w + cfg.d_h

    # centers: root offsets at center_scale, each level below shrinks by child_scale
    centers = np.zeros((len(h), d_tot))
    for i in range(len(h)):
        p = h.parent[i]
        scale = cfg.center_scale * cfg.child_scale ** (h.depth(i) - 1)
        centers[i] = (0 if p is None else centers[p]) + rng.normal(0, scale, size=d_tot)
    # secondary mode of each leaf: part-way toward a fixed partner leaf
    shift = np.zeros_like(centers)
    for g in leaves:
        partner = rng.choice([t for t in leaves if t != g])
        shift[g] = cfg.mode_shift * (centers[partner] - centers[g])

    def draw(split, idx, noisy):
        g = leaves[rng.integers(len(leaves))]
        u = centers[g] + rng.normal(0, cfg.cluster_spread / math.sqrt(d_tot), size=d_tot)
        cands = set(h.path(g))
        if noisy:
            u += shift[g]
            n_extra = int(rng.integers(1, min(cfg.max_extra_paths, len(leaves) - 1) + 1))
            others = [t for t in leaves if t != g]
            for t in rng.choice(others, size=n_extra, replace=False):
                cands |= h.path(int(t))
            if split != "train":
                cands = set(h.path(g))
        uw, uh = u[: cfg.d_w], u[cfg.d_w :]
        mention = uw + rng.normal(0, cfg.token_noise, size=(cfg.mention_len, cfg.d_w))
        context = rng.normal(0, 1.0, size=(cfg.context_len, cfg.d_h))
        informative = rng.random(cfg.context_len) < cfg.context_signal
        informative[rng.integers(cfg.context_len)] = True
        context[informative] = uh + rng.normal(0, cfg.token_noise, size=(int(informative.sum()), cfg.d_h))
        return MentionSample(
            id=f"{split}-{idx}",
            mention_vecs=mention,
            context_vecs=context,
            candidates=frozenset(cands),
            gold=g,
            split=split,
        )

    samples = []
    for split, n in (("train", cfg.n_samples), ("dev", cfg.n_dev), ("test", cfg.n_test)):
        noisy = rng.random(n) < cfg.noise_rate
        samples.extend(draw(split, i, bool(noisy[i])) for i in range(n))
    return Dataset(h, samples, cfg.d_w, cfg.d_h, meta={"generator": asdict(cfg)})
