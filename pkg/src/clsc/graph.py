"""Batch similarity graph and candidate-constrained label propagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateClampError, NumericalError, ValidationError

__all__ = [
    "SimilarityGraph",
    "PropagationResult",
    "row_softmax",
    "build_graph",
    "graph_backward",
    "clamp",
    "propagate",
]

PROPAGATION_TOL = 1e-10


@dataclass
class SimilarityGraph:
    """Scaled dot-product logits and their row-stochastic transition matrix."""

    logits: np.ndarray
    H: np.ndarray
    zero_diagonal: bool = False

    @property
    def B(self) -> int:
        return self.H.shape[0]


@dataclass
class PropagationResult:
    Phi: np.ndarray
    iterations: int
    converged: bool
    residual: float


def row_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    out = np.exp(shifted)
    out /= out.sum(axis=1, keepdims=True)
    return out


def build_graph(Z: np.ndarray, zero_diagonal: bool = False) -> SimilarityGraph:
    """Fully connected graph over the rows of ``Z``.

    ``H`` is the row softmax of ``Z Z^T / sqrt(d_z)``, i.e. the exponentiated
    similarities normalized per row; the exponentials are never formed
    directly. Self-loops are kept unless ``zero_diagonal`` is set.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2 or Z.shape[1] < 1:
        raise ValidationError(f"Z must be a (B >= 2, d_z >= 1) matrix, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise NumericalError("Z contains non-finite entries")
    logits = Z @ Z.T / np.sqrt(Z.shape[1])
    if zero_diagonal:
        masked = logits.copy()
        np.fill_diagonal(masked, -np.inf)
        H = row_softmax(masked)
    else:
        H = row_softmax(logits)
    return SimilarityGraph(logits=logits, H=H, zero_diagonal=zero_diagonal)


def graph_backward(Z: np.ndarray, g: SimilarityGraph, dH: np.ndarray) -> np.ndarray:
    """Map dL/dH back to dL/dZ through the row softmax and the Gram matrix."""
    H = g.H
    d_logits = H * (dH - (H * dH).sum(axis=1, keepdims=True))
    if g.zero_diagonal:
        np.fill_diagonal(d_logits, 0.0)
    return (d_logits + d_logits.T) @ Z / np.sqrt(Z.shape[1])


def clamp(Phi: np.ndarray, M: np.ndarray, iteration: int = 0) -> np.ndarray:
    """Zero entries outside the candidate mask and renormalize each row."""
    masked = Phi * M
    denom = masked.sum(axis=1, keepdims=True)
    bad = np.flatnonzero(~(denom[:, 0] > 0))
    if bad.size:
        raise DegenerateClampError(int(bad[0]), iteration)
    return masked / denom


def propagate(g, M, S_lp: int = 200, seed=None, tol: float = PROPAGATION_TOL) -> PropagationResult:
    """Label propagation with candidate-mask clamping.

    Starts from a seeded uniform-random posterior, then alternates
    ``Phi <- H Phi`` with :func:`clamp` at most ``S_lp`` times, stopping early
    once the largest entry change drops below ``tol``.

    Parameters
    ----------
    g : SimilarityGraph or ndarray
        Graph (or a bare row-stochastic ``H``).
    M : ndarray, shape (B, K)
        0/1 candidate indicator, at least one 1 per row.
    S_lp : int
        Maximum number of propagate-and-clamp steps.
    seed : int or numpy Generator, optional
        Source for the random initial posterior.
    """
    H = g.H if isinstance(g, SimilarityGraph) else np.asarray(g, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or M.ndim != 2 or M.shape[0] != H.shape[0]:
        raise ValidationError(f"incompatible shapes H {H.shape} and M {M.shape}")
    if S_lp < 1:
        raise ValidationError("S_lp must be >= 1")
    if not np.all((M == 0) | (M == 1)):
        raise ValidationError("M must be a 0/1 matrix")
    empty = np.flatnonzero(M.sum(axis=1) == 0)
    if empty.size:
        raise ValidationError(f"row {int(empty[0])} of M has no candidate")

    rng = np.random.default_rng(seed)
    Phi = clamp(rng.uniform(size=M.shape), M)
    residual = np.inf
    it = 0
    for it in range(1, S_lp + 1):
        new = clamp(H @ Phi, M, iteration=it)
        residual = float(np.abs(new - Phi).max())
        Phi = new
        if residual < tol:
            break
    return PropagationResult(Phi=Phi, iterations=it, converged=residual < tol, residual=residual)
