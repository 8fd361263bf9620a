"""Shared builders for test instances."""

import numpy as np

from clsc.hierarchy import MentionSample, TypeHierarchy, build_batch


def random_sample(rng, h, sid, d_w=3, d_h=3, n_mention=2, n_context=4, leaves=None):
    """A sample whose candidates are the paths of ``leaves`` (random leaf if None)."""
    if leaves is None:
        leaves = [int(rng.choice(h.leaves()))]
    return MentionSample(
        id=str(sid),
        mention_vecs=rng.normal(size=(n_mention, d_w)),
        context_vecs=rng.normal(size=(n_context, d_h)),
        candidates=h.closure(leaves),
        gold=leaves[0],
    )


def random_batch(rng, h, B, d_w=3, d_h=3, noisy_rate=0.5):
    """B samples with varying context lengths; roughly ``noisy_rate`` carry two paths."""
    samples = []
    leaves = h.leaves()
    for i in range(B):
        k = 2 if rng.random() < noisy_rate else 1
        chosen = [int(t) for t in rng.choice(leaves, size=k, replace=False)]
        samples.append(
            random_sample(rng, h, i, d_w, d_h, n_mention=int(rng.integers(1, 4)),
                          n_context=int(rng.integers(1, 6)), leaves=chosen)
        )
    return build_batch(h, samples)


def flat_hierarchy(K):
    return TypeHierarchy.from_paths([f"/t{k}" for k in range(K)])


def two_clique_H(eps=1e-9):
    """Block-diagonal-dominant transition matrix over {0,1,2} and {3,4,5}."""
    A = np.full((6, 6), eps)
    A[:3, :3] = 1.0
    A[3:, 3:] = 1.0
    return A / A.sum(axis=1, keepdims=True)


TWO_CLIQUE_M = np.array([[1, 0], [1, 1], [1, 1], [0, 1], [1, 1], [1, 1]], dtype=float)


def loop_propagate(H, M, Phi, steps):
    """Plain-Python propagate/clamp iteration used as an independent oracle."""
    B, K = len(M), len(M[0])
    Phi = [list(r) for r in Phi]
    for _ in range(steps):
        new = [[sum(H[i][b] * Phi[b][k] for b in range(B)) for k in range(K)] for i in range(B)]
        for i in range(B):
            tot = sum(new[i][k] * M[i][k] for k in range(K))
            new[i] = [new[i][k] * M[i][k] / tot for k in range(K)]
        Phi = new
    return np.array(Phi)
