"""Compact-clustering regularizer.

Given a propagated label posterior ``Phi`` the target transition matrix ``T``
is uniform within a class and zero across classes. The loss is the
cross-entropy between ``T`` and the s-step transition matrices of a random
walk whose steps after the first are restricted to label-agreeing pairs.
``Phi`` is treated as a constant: gradients flow only through ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .exceptions import ValidationError
from .graph import build_graph, graph_backward

__all__ = [
    "LOG_EPS",
    "ClscTerms",
    "target_matrix",
    "agreement_mask",
    "markov_powers",
    "clsc_loss",
    "one_step_loss",
    "clsc_forward",
    "clsc_grad_H",
    "clsc_backward",
]

LOG_EPS = 1e-12


@dataclass
class ClscTerms:
    T: np.ndarray
    E: np.ndarray
    H_powers: List[np.ndarray]
    loss: float


def target_matrix(Phi: np.ndarray) -> np.ndarray:
    """``T_ij = sum_k Phi_ik Phi_jk / m_k`` with class mass ``m_k = sum_b Phi_bk``.

    Classes with zero mass contribute nothing.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    m = Phi.sum(axis=0)
    inv = np.divide(1.0, m, out=np.zeros_like(m), where=m > 0)
    return (Phi * inv) @ Phi.T


def agreement_mask(Phi: np.ndarray) -> np.ndarray:
    """Pairwise label agreement ``E = Phi Phi^T`` (B x B)."""
    Phi = np.asarray(Phi, dtype=np.float64)
    return Phi @ Phi.T


def markov_powers(H: np.ndarray, E: np.ndarray, S_m: int) -> List[np.ndarray]:
    """``[H^(1), ..., H^(S_m)]`` with ``H^(1) = H`` and ``H^(s) = (H * E) H^(s-1)``."""
    if S_m < 1:
        raise ValidationError("S_m must be >= 1")
    if H.shape != E.shape:
        raise ValidationError(f"H {H.shape} and E {E.shape} differ in shape")
    P = H * E
    out = [H]
    for _ in range(1, S_m):
        out.append(P @ out[-1])
    return out


def clsc_loss(T: np.ndarray, H_powers) -> float:
    """Cross-entropy of ``T`` against each ``H^(s)``, averaged over s and B^2.

    Entries where ``T_ij == 0`` are skipped before taking the log.
    """
    S_m = len(H_powers)
    if S_m == 0:
        raise ValidationError("H_powers is empty")
    B = T.shape[0]
    nz = T != 0
    Tn = T[nz]
    total = 0.0
    for Hs in H_powers:
        if Hs.shape != T.shape:
            raise ValidationError(f"H^(s) shape {Hs.shape} differs from T {T.shape}")
        total += float(np.sum(Tn * np.log(Hs[nz] + LOG_EPS)))
    return -total / (S_m * B * B)


def one_step_loss(T: np.ndarray, H: np.ndarray) -> float:
    """Single-transition cross-entropy; identical to ``clsc_loss`` with S_m = 1."""
    return clsc_loss(T, [H])


def clsc_forward(H: np.ndarray, Phi: np.ndarray, S_m: int) -> ClscTerms:
    T = target_matrix(Phi)
    E = agreement_mask(Phi)
    powers = markov_powers(H, E, S_m)
    return ClscTerms(T=T, E=E, H_powers=powers, loss=clsc_loss(T, powers))


def clsc_grad_H(terms: ClscTerms) -> np.ndarray:
    """dL/dH for fixed ``T`` and ``E``, through all Markov powers."""
    T, E, powers = terms.T, terms.E, terms.H_powers
    S_m = len(powers)
    B = T.shape[0]
    scale = -1.0 / (S_m * B * B)
    nz = T != 0

    def direct(Hs):
        g = np.zeros_like(T)
        g[nz] = scale * T[nz] / (Hs[nz] + LOG_EPS)
        return g

    H = powers[0]
    P = H * E
    # reverse through H^(s) = P H^(s-1); G carries dL/dH^(s)
    G = direct(powers[-1])
    dP = np.zeros_like(H)
    for s in range(S_m - 1, 0, -1):
        dP += G @ powers[s - 1].T
        G = P.T @ G + direct(powers[s - 1])
    return G + dP * E


def clsc_backward(Z: np.ndarray, Phi: np.ndarray, S_m: int, zero_diagonal: bool = False):
    """Loss and dL/dZ with ``Phi`` frozen.

    Returns
    -------
    loss : float
    dZ : ndarray, shape (B, d_z)
    """
    Z = np.asarray(Z, dtype=np.float64)
    Phi = np.asarray(Phi, dtype=np.float64)
    if Phi.ndim != 2 or Phi.shape[0] != Z.shape[0]:
        raise ValidationError(f"Phi shape {Phi.shape} does not match Z shape {Z.shape}")
    g = build_graph(Z, zero_diagonal=zero_diagonal)
    terms = clsc_forward(g.H, Phi, S_m)
    dZ = graph_backward(Z, g, clsc_grad_H(terms))
    return terms.loss, dZ
