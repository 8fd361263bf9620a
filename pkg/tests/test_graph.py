import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clsc.exceptions import DegenerateClampError, NumericalError, ValidationError
from clsc.graph import build_graph, propagate, row_softmax
from helpers import TWO_CLIQUE_M, loop_propagate, two_clique_H


finite_Z = arrays(
    np.float64,
    st.tuples(st.integers(2, 8), st.integers(1, 5)),
    elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False),
)


class TestBuildGraph:
    def test_zero_embeddings_uniform(self):
        g = build_graph(np.zeros((3, 2)))
        np.testing.assert_allclose(g.H, np.full((3, 3), 1 / 3), rtol=0, atol=1e-16)

    def test_two_nodes(self):
        g = build_graph(np.array([[2.0], [0.0]]))
        np.testing.assert_array_equal(g.logits, [[4.0, 0.0], [0.0, 0.0]])
        e4 = math.exp(4.0)
        np.testing.assert_allclose(g.H[0], [e4 / (e4 + 1), 1 / (e4 + 1)], rtol=1e-15)
        assert g.H[0, 0] == pytest.approx(0.9820, abs=1e-4)

    def test_duplicate_rows_identical(self):
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(3, 4))
        Z = np.vstack([Z, Z[1:2]])
        H = build_graph(Z).H
        np.testing.assert_array_equal(H[1], H[3])

    def test_large_norms_do_not_overflow(self):
        Z = np.array([[300.0, 0.0], [0.0, 300.0], [200.0, 200.0]])
        H = build_graph(Z).H
        assert np.all(np.isfinite(H))
        np.testing.assert_allclose(H.sum(axis=1), 1.0, atol=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            build_graph(np.zeros((1, 3)))
        with pytest.raises(NumericalError):
            build_graph(np.array([[np.nan], [0.0]]))

    def test_zero_diagonal_flag(self):
        rng = np.random.default_rng(0)
        g = build_graph(rng.normal(size=(5, 3)), zero_diagonal=True)
        assert not np.diag(g.H).any()
        np.testing.assert_allclose(g.H.sum(axis=1), 1.0, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(finite_Z)
    def test_invariants(self, Z):
        g = build_graph(Z)
        np.testing.assert_allclose(g.logits, g.logits.T, rtol=0, atol=1e-9)
        np.testing.assert_allclose(g.H.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert np.all(g.H > 0)

    @settings(max_examples=100, deadline=None)
    @given(finite_Z)
    def test_row_shift_invariance(self, Z):
        logits = build_graph(Z).logits
        np.testing.assert_allclose(row_softmax(logits + 100.0), build_graph(Z).H, rtol=0, atol=1e-12)


class TestPropagate:
    def test_one_hot_rows_fixed_immediately(self):
        rng = np.random.default_rng(0)
        M = np.eye(3)[[0, 2, 1, 1]]
        H = row_softmax(rng.normal(size=(4, 4)))
        res = propagate(H, M, S_lp=5, seed=3)
        np.testing.assert_array_equal(res.Phi, M)
        assert res.converged and res.iterations == 1

    def test_two_node_fixed_point(self):
        H = np.full((2, 2), 0.5)
        M = np.array([[1.0, 0.0], [1.0, 1.0]])
        res = propagate(H, M, S_lp=200, seed=0)
        # phi = clamp(0.5 * (1, 0) + 0.5 * phi) has the unique fixed point (1, 0)
        np.testing.assert_allclose(res.Phi, [[1, 0], [1, 0]], rtol=0, atol=1e-8)
        assert res.converged and res.residual < 1e-8
        init = np.random.default_rng(0).uniform(size=(2, 2)) * M
        init /= init.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(res.Phi, loop_propagate(H, M, init, 200), rtol=0, atol=1e-8)

    def test_two_cliques(self):
        H = two_clique_H()
        res = propagate(H, TWO_CLIQUE_M, S_lp=200, seed=7)
        assert res.converged and res.residual < 1e-8
        assert res.Phi[:3, 1].max() < 1e-6
        assert res.Phi[3:, 0].max() < 1e-6
        oracle = loop_propagate(H.tolist(), TWO_CLIQUE_M.tolist(), np.full((6, 2), 0.5) * TWO_CLIQUE_M, 200)
        np.testing.assert_allclose(res.Phi, oracle, rtol=0, atol=1e-8)

    def test_degenerate_clamp_names_row(self):
        H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        M = np.eye(3)
        with pytest.raises(DegenerateClampError) as err:
            propagate(H, M, S_lp=3, seed=0)
        assert err.value.row == 2

    def test_validation(self):
        H = np.full((2, 2), 0.5)
        with pytest.raises(ValidationError, match="no candidate"):
            propagate(H, np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(ValidationError):
            propagate(H, np.eye(2), S_lp=0)
        with pytest.raises(ValidationError):
            propagate(H, np.eye(3))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        H = build_graph(rng.normal(size=(7, 3))).H
        M = (rng.random((7, 4)) < 0.5).astype(float)
        M[np.arange(7), rng.integers(4, size=7)] = 1
        a = propagate(H, M, S_lp=3, seed=11)
        b = propagate(H, M, S_lp=3, seed=11)
        np.testing.assert_array_equal(a.Phi, b.Phi)

    def test_all_clean_independent_of_seed_and_steps(self):
        rng = np.random.default_rng(4)
        H = build_graph(rng.normal(size=(6, 3))).H
        M = np.eye(3)[rng.integers(3, size=6)]
        ref = propagate(H, M, S_lp=1, seed=0).Phi
        for seed, steps in [(1, 5), (2, 200), (99, 17)]:
            np.testing.assert_array_equal(propagate(H, M, S_lp=steps, seed=seed).Phi, ref)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 10), st.integers(1, 5), st.integers(1, 6))
    def test_posterior_invariants(self, seed, B, K, S_lp):
        rng = np.random.default_rng(seed)
        H = build_graph(rng.normal(size=(B, 3))).H
        M = (rng.random((B, K)) < 0.4).astype(float)
        M[np.arange(B), rng.integers(K, size=B)] = 1
        Phi = propagate(H, M, S_lp=S_lp, seed=seed).Phi
        np.testing.assert_allclose(Phi.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert not Phi[M == 0].any()
        clean = M.sum(axis=1) == 1
        np.testing.assert_array_equal(Phi[clean], M[clean])
