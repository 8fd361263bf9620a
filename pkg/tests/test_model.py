import math

import numpy as np
import pytest

from clsc.exceptions import ValidationError
from clsc.gradcheck import numeric_grad, rel_error
from clsc.loss import clsc_backward
from clsc.model import (
    ClassifierParams,
    ModelParams,
    classify,
    init_model,
    objective,
    supervision_loss,
    total_loss,
)
from clsc.train import AdamState, adam_step
from helpers import flat_hierarchy, random_batch


class TestClassify:
    def test_zero_weights_uniform(self):
        p = ClassifierParams(np.zeros((4, 3)), np.zeros(4))
        np.testing.assert_array_equal(classify(p, np.array([1.0, -2.0, 3.0])), np.full(4, 0.25))

    def test_log_two_logit(self):
        p = ClassifierParams(np.eye(2), np.zeros(2))
        np.testing.assert_allclose(classify(p, np.array([math.log(2), 0.0])), [2 / 3, 1 / 3], rtol=1e-15)

    def test_bias_only(self):
        p = ClassifierParams(np.zeros((3, 2)), np.log([1.0, 2.0, 5.0]))
        np.testing.assert_allclose(classify(p, np.zeros(2)), [0.125, 0.25, 0.625], rtol=1e-15)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = ClassifierParams(rng.normal(size=(5, 4)) * 10, rng.normal(size=5))
            probs = classify(p, rng.normal(size=(7, 4)) * 10)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12)
            assert probs.min() >= 0

    def test_width_mismatch(self):
        with pytest.raises(ValidationError):
            classify(ClassifierParams(np.zeros((2, 3)), np.zeros(2)), np.zeros(4))


class TestSupervisionLoss:
    def test_log_two(self):
        rng = np.random.default_rng(0)
        h = flat_hierarchy(2)
        b = random_batch(rng, h, 4, noisy_rate=0.0)
        p = ClassifierParams(np.zeros((2, 3)), np.zeros(2))
        assert supervision_loss(p, np.zeros((4, 3)), b) == pytest.approx(math.log(2), rel=1e-15)

    def test_no_clean_rows(self):
        rng = np.random.default_rng(0)
        b = random_batch(rng, flat_hierarchy(3), 4, noisy_rate=1.0)
        assert not b.clean_flags.any()
        p = ClassifierParams(rng.normal(size=(3, 2)), np.zeros(3))
        assert supervision_loss(p, rng.normal(size=(4, 2)), b) == 0.0

    def test_noisy_rows_ignored(self):
        rng = np.random.default_rng(3)
        b = random_batch(rng, flat_hierarchy(3), 8)
        p = ClassifierParams(rng.normal(size=(3, 2)), rng.normal(size=3))
        Z = rng.normal(size=(8, 2))
        ref = supervision_loss(p, Z, b)
        Z[~b.clean_flags] = 1e3
        assert supervision_loss(p, Z, b) == ref


class TestTotalLoss:
    def test_arithmetic(self):
        assert total_loss(1.0, 0.5, 2.0) == 2.0
        assert total_loss(1.0, 0.5, 0.0) == 1.0
        assert total_loss(1.0, 0.5, 2.0, l2=3.0, lambda_l2=0.1) == pytest.approx(2.3)


class TestAdam:
    def test_first_scalar_step(self):
        p = {"x": np.array([1.0])}
        adam_step(AdamState(), p, {"x": np.array([0.5])}, lr=0.001)
        # bias-corrected first step moves by lr * g / (|g| + eps)
        assert p["x"][0] - 1.0 == pytest.approx(-0.001 * 0.5 / (0.5 + 1e-8), rel=1e-12)

    def test_zero_gradient_no_move(self):
        p = {"x": np.array([1.0, -2.0])}
        adam_step(AdamState(), p, {"x": np.zeros(2)}, lr=0.1)
        np.testing.assert_array_equal(p["x"], [1.0, -2.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            adam_step(AdamState(), {"x": np.zeros(2)}, {"x": np.zeros(3)}, lr=0.1)

    def test_minimizes_quadratic(self):
        p = {"x": np.array([3.0, -4.0])}
        state = AdamState()
        for _ in range(2000):
            adam_step(state, p, {"x": 2 * p["x"]}, lr=0.01)
        np.testing.assert_allclose(p["x"], 0.0, atol=1e-2)


class TestObjective:
    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("S_m", [1, 3])
    def test_parameter_gradients(self, seed, S_m):
        rng = np.random.default_rng(100 + seed)
        batch = random_batch(rng, flat_hierarchy(3), 6)
        params = init_model(3, 3, 3, d_z=4, hidden=5, rng=rng)
        params.encoder.attn_w[:] = rng.normal(size=3)
        kw = dict(lambda_clsc=1.5, S_m=S_m, lambda_l2=0.01, lp_seed=seed)
        _, _, extras = objective(params, batch, **kw)
        kw["Phi"] = extras["Phi"]
        _, grads, _ = objective(params, batch, **kw)
        for name, arr in params.arrays().items():
            num = numeric_grad(lambda: objective(params, batch, **kw)[0].total, arr)
            assert rel_error(grads[name], num) <= 1e-5, name

    @pytest.mark.parametrize("S_m", [1, 3])
    def test_embedding_gradient(self, S_m):
        rng = np.random.default_rng(7)
        batch = random_batch(rng, flat_hierarchy(3), 6)
        params = init_model(3, 3, 3, d_z=4, hidden=5, rng=rng)
        _, _, extras = objective(params, batch, lambda_clsc=2.0, S_m=S_m, lp_seed=0)
        Z, Phi = extras["Z"].copy(), extras["Phi"]

        def f():
            return supervision_loss(params.classifier, Z, batch) + 2.0 * clsc_backward(Z, Phi, S_m)[0]

        assert rel_error(extras["dZ"], numeric_grad(f, Z)) <= 1e-5

    def test_lambda_zero_ignores_noisy_rows(self):
        rng = np.random.default_rng(11)
        batch = random_batch(rng, flat_hierarchy(3), 10, noisy_rate=0.5)
        assert 0 < batch.clean_flags.sum() < 10
        params = init_model(3, 3, 3, d_z=4, rng=rng)
        t_full, g_full, _ = objective(params, batch, lambda_clsc=0.0, lambda_l2=0.01)
        t_clean, g_clean, _ = objective(params, batch.take(np.flatnonzero(batch.clean_flags)), lambda_l2=0.01)
        assert t_full.total == t_clean.total
        for name in g_full:
            np.testing.assert_array_equal(g_full[name], g_clean[name])

    def test_clsc_term_reported(self):
        rng = np.random.default_rng(12)
        batch = random_batch(rng, flat_hierarchy(3), 6)
        params = init_model(3, 3, 3, d_z=4, rng=rng)
        terms, _, extras = objective(params, batch, lambda_clsc=2.0, S_m=2, lp_seed=0)
        assert terms.clsc is not None and terms.clsc > 0
        assert terms.total == pytest.approx(terms.sup + 2.0 * terms.clsc, rel=1e-15)
        np.testing.assert_allclose(extras["Phi"].sum(axis=1), 1.0, atol=1e-12)
        assert objective(params, batch)[0].clsc is None


class TestModelParams:
    def test_round_trip(self):
        p = init_model(3, 4, 5, d_z=6, n_layers=2, hidden=7, rng=0)
        q = ModelParams.from_arrays({k: v.tolist() for k, v in p.arrays().items()})
        for name, arr in p.arrays().items():
            np.testing.assert_array_equal(q.arrays()[name], arr)

    def test_missing_tensor(self):
        arrays = init_model(3, 3, 2, rng=0).arrays()
        del arrays["clf.b"]
        with pytest.raises(ValidationError, match="clf.b"):
            ModelParams.from_arrays(arrays)

    def test_copy_is_deep(self):
        p = init_model(3, 3, 2, rng=0)
        q = p.copy()
        q.classifier.W += 1
        assert not np.array_equal(p.classifier.W, q.classifier.W)

    def test_weight_names(self):
        names = [n for n in init_model(3, 3, 2, rng=0).arrays() if ModelParams.is_weight(n)]
        assert names == ["attn_w", "q0.W", "q1.W", "clf.W"]
