import numpy as np
import pytest

from clsc.exceptions import NumericalError, ValidationError
from clsc.hierarchy import MentionSample
from clsc.model import init_model
from clsc.train import TrainConfig, evaluate_params, iter_batches, train
from helpers import flat_hierarchy


def blob_samples(rng, h, n, noisy_rate=0.0, sep=3.0):
    """Samples whose mention vector sits near a per-type center."""
    K = len(h)
    centers = rng.normal(size=(K, 3)) * sep
    out = []
    for i in range(n):
        g = int(rng.integers(K))
        cand = {g}
        if rng.random() < noisy_rate:
            cand.add(int((g + 1 + rng.integers(K - 1)) % K))
        ment = centers[g] + rng.normal(size=(2, 3)) * 0.3
        ctx = rng.normal(size=(3, 3))
        out.append(MentionSample(f"s{i}", ment, ctx, cand, gold=g))
    return out


class TestIterBatches:
    def test_covers_permutation(self):
        chunks = iter_batches(10, 4, np.random.default_rng(0))
        assert [len(c) for c in chunks] == [4, 4, 2]
        np.testing.assert_array_equal(np.sort(np.concatenate(chunks)), np.arange(10))

    def test_singleton_tail_merged(self):
        chunks = iter_batches(129, 64, np.random.default_rng(0))
        assert [len(c) for c in chunks] == [64, 65]

    def test_exact_multiple(self):
        assert [len(c) for c in iter_batches(8, 4, np.random.default_rng(1))] == [4, 4]


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.S_lp, cfg.S_m, cfg.batch_size, cfg.epochs) == (200, 8, 64, 30)

    def test_from_dict_unknown_key(self):
        with pytest.raises(ValidationError, match="bogus"):
            TrainConfig.from_dict({"bogus": 1})

    @pytest.mark.parametrize(
        "bad", [{"lr": 0}, {"batch_size": 1}, {"S_m": 0}, {"S_lp": 0}, {"lambda_clsc": -1}, {"epochs": -1}]
    )
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)

    def test_replace_and_round_trip(self):
        cfg = TrainConfig(lr=0.02).replace(S_m=3)
        assert cfg.lr == 0.02 and cfg.S_m == 3
        assert TrainConfig.from_dict(cfg.as_dict()) == cfg


class TestTrain:
    def test_supervised_loss_decreases(self):
        rng = np.random.default_rng(0)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 96)
        rep = train(data, h, TrainConfig(lambda_clsc=0.0, epochs=5, batch_size=16, lr=0.01))
        losses = [r.total_loss for r in rep.epochs]
        assert losses[-1] < losses[0]
        assert all(r.clsc_loss is None for r in rep.epochs)

    def test_learns_separable_blobs(self):
        rng = np.random.default_rng(1)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 150, noisy_rate=0.2)
        rep = train(data, h, TrainConfig(epochs=15, batch_size=32, lr=0.01, S_m=2))
        assert evaluate_params(rep.params, h, data).strict_acc > 0.9
        assert all(r.clsc_loss is not None for r in rep.epochs)

    def test_all_noisy_without_regularizer_is_noop(self):
        rng = np.random.default_rng(2)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 20, noisy_rate=1.0)
        init = init_model(3, 3, 3, d_z=4, rng=0)
        rep = train(data, h, TrainConfig(lambda_clsc=0.0, epochs=3, batch_size=8, d_z=4), params=init.copy())
        for name, arr in init.arrays().items():
            np.testing.assert_array_equal(rep.params.arrays()[name], arr)

    def test_reproducible(self):
        rng = np.random.default_rng(3)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 40, noisy_rate=0.3)
        cfg = TrainConfig(epochs=2, batch_size=16, seed=5)
        a, b = train(data, h, cfg), train(data, h, cfg)
        for name, arr in a.params.arrays().items():
            np.testing.assert_array_equal(b.params.arrays()[name], arr)
        c = train(data, h, cfg.replace(seed=6))
        assert not np.array_equal(c.params.classifier.W, a.params.classifier.W)

    def test_best_dev_snapshot(self):
        rng = np.random.default_rng(4)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 60)
        dev = blob_samples(rng, h, 30)
        rep = train(data, h, TrainConfig(epochs=4, batch_size=16, lambda_clsc=0.0), dev=dev)
        scores = [r.dev.strict_acc for r in rep.epochs]
        assert rep.best_epoch == int(np.argmax(scores)) + 1
        assert evaluate_params(rep.best_params, h, dev).strict_acc == max(scores)
        assert "dev_strict_acc" in rep.history()[0]

    def test_non_finite_loss(self):
        rng = np.random.default_rng(5)
        h = flat_hierarchy(3)
        data = blob_samples(rng, h, 10)
        params = init_model(3, 3, 3, d_z=4, rng=0)
        params.classifier.W[:] = np.nan
        with pytest.raises(NumericalError, match="epoch 1"):
            train(data, h, TrainConfig(epochs=1, d_z=4, lambda_clsc=0.0), params=params)

    def test_too_few_samples(self):
        h = flat_hierarchy(2)
        with pytest.raises(ValidationError):
            train(blob_samples(np.random.default_rng(0), h, 1), h, TrainConfig())
