"""Strict accuracy and loose macro/micro F1 over type paths.

Each prediction and gold label is expanded to the set of types on its path
from the root; the three scores compare those sets.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import ValidationError
from .hierarchy import TypeHierarchy

__all__ = ["EvalResult", "expand_path", "evaluate"]


@dataclass(frozen=True)
class EvalResult:
    strict_acc: float
    macro_f1: float
    micro_f1: float
    n_mentions: int

    def as_dict(self, prefix=""):
        return {prefix + k: v for k, v in asdict(self).items()}


def expand_path(h: TypeHierarchy, t: int) -> frozenset:
    """``{t}`` plus every ancestor of ``t``."""
    return h.path(t)


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _gold_set(h, gold):
    if isinstance(gold, (int, np.integer)):
        return expand_path(h, int(gold))
    # multi-path gold: union of all of its paths
    return h.closure(int(g) for g in gold)


def evaluate(
    h: TypeHierarchy,
    predictions: Sequence[int],
    golds: Sequence[Union[int, Iterable[int]]],
) -> EvalResult:
    """Score predicted terminal types against gold types.

    ``golds`` entries may be a single type index or a collection of indices
    (the union of their paths is used).
    """
    predictions = list(predictions)
    golds = list(golds)
    if len(predictions) != len(golds):
        raise ValidationError(f"{len(predictions)} predictions but {len(golds)} golds")
    if not predictions:
        raise ValidationError("cannot evaluate an empty prediction list")

    strict = 0
    macro_p = macro_r = 0.0
    n_inter = n_pred = n_gold = 0
    for pred, gold in zip(predictions, golds):
        P = expand_path(h, int(pred))
        G = _gold_set(h, gold)
        inter = len(P & G)
        strict += P == G
        macro_p += inter / len(P)
        macro_r += inter / len(G)
        n_inter += inter
        n_pred += len(P)
        n_gold += len(G)

    n = len(predictions)
    return EvalResult(
        strict_acc=strict / n,
        macro_f1=_f1(macro_p / n, macro_r / n),
        micro_f1=_f1(n_inter / n_pred, n_inter / n_gold),
        n_mentions=n,
    )
