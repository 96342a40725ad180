import csv

import numpy as np
import pytest

from hypoxbench import autodiff as ad
from hypoxbench.errors import ConfigError, ContractError, NumericError, TrainingError
from hypoxbench.models import ARCHITECTURES, ModelConfig, build_model
from hypoxbench.preprocess import SequenceDataset
from hypoxbench.training import TrainConfig, predict_proba, smote_seed, train

T, F = 7, 7


def make_dataset(x, y):
    n = len(y)
    dates = np.arange(n).astype("datetime64[D]")
    meta = {"date": dates, "start_date": dates, "cell_id": np.arange(n), "depth_bin": np.zeros(n, np.int64),
            "synthetic": np.zeros(n, bool)}
    return SequenceDataset(np.asarray(x, np.float64), np.asarray(y, np.int8), meta, x.shape[1], 1)


def separable(n=500, seed=0):
    x = np.random.default_rng(seed).uniform(0, 1, (n, T, F))
    return make_dataset(x, (x.mean(axis=(1, 2)) > 0.5).astype(np.int8))


def imbalanced(n, minority, seed=0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n, np.int8)
    y[rng.permutation(n)[:int(round(minority * n))]] = 1
    return make_dataset(rng.uniform(0, 1, (n, T, F)), y)


TINY = ModelConfig.default("tcn", hidden=2, layers=1, dilations=(1,))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(epochs=0), dict(batch_size=0), dict(lr=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)

    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.epochs, cfg.batch_size, cfg.lr) == (30, 1024, 0.001)


class TestTrain:
    @pytest.mark.parametrize("arch", ARCHITECTURES)
    def test_loss_falls_on_separable_set(self, arch):
        _, log = train(ModelConfig.default(arch), separable(), TrainConfig(epochs=8, batch_size=64, seed=1))
        assert len(log.epochs) == 8
        assert log.losses[-1] < log.losses[0]

    def test_same_seed_identical(self, tmp_path):
        ds = separable(200)
        cfg = TrainConfig(epochs=3, batch_size=32, seed=4)
        m1, l1 = train(ModelConfig.default("medformer"), ds, cfg)
        m2, l2 = train(ModelConfig.default("medformer"), ds, cfg)
        assert l1 == l2
        s1, s2 = m1.state_dict(), m2.state_dict()
        assert all(s1[k].tobytes() == s2[k].tobytes() for k in s1)

    def test_different_seed_differs(self):
        ds = separable(200)
        _, l1 = train(TINY, ds, TrainConfig(epochs=2, batch_size=32, seed=1))
        _, l2 = train(TINY, ds, TrainConfig(epochs=2, batch_size=32, seed=2))
        assert l1 != l2

    @pytest.mark.parametrize("y", [np.zeros(50), np.ones(50)])
    def test_single_class(self, y):
        ds = make_dataset(np.zeros((50, T, F)), y)
        with pytest.raises(TrainingError):
            train(TINY, ds, TrainConfig(epochs=1))

    def test_non_finite_loss_names_epoch_and_batch(self):
        ds = separable(100)
        model = build_model(TINY, F, T)
        model.params["head.W"].data[:] = np.nan
        with pytest.raises(NumericError, match="epoch 1"):
            train(TINY, ds, TrainConfig(epochs=1), model=model)
        assert len(ad.get_tape()) == 0

    def test_batch_losses_average_to_epoch_loss(self):
        _, log = train(TINY, separable(300), TrainConfig(epochs=3, batch_size=64))
        for e in log.epochs:
            assert len(e.batch_losses) == 5  # 300 = 4 * 64 + 44, short batch kept
            assert abs(np.mean(e.batch_losses) - e.loss) <= 1e-9
            assert e.samples == 300

    @pytest.mark.parametrize("minority", [0.05, 0.1, 0.25])
    def test_weighted_epochs_are_balanced(self, minority):
        _, log = train(TINY, imbalanced(4000, minority), TrainConfig(epochs=3, batch_size=1024))
        for e in log.epochs:
            assert 0.45 <= e.positive_fraction <= 0.55

    def test_unweighted_epoch_is_a_permutation(self):
        ds = imbalanced(500, 0.1)
        _, log = train(TINY, ds, TrainConfig(epochs=2, batch_size=128, use_weighted_sampling=False))
        assert all(e.positives == 50 and e.samples == 500 for e in log.epochs)

    def test_smote_counts_recorded(self):
        ds = imbalanced(400, 0.1)
        _, log = train(TINY, ds, TrainConfig(epochs=1, use_smote=True, use_weighted_sampling=False))
        assert log.train_samples == 400
        assert log.synthetic_samples == 360 - 40
        assert log.epochs[0].samples == 720

    def test_smote_seed_derived_from_run_seed(self):
        assert smote_seed(7) == smote_seed(7) != smote_seed(8)

    def test_model_left_in_eval_mode(self):
        model, _ = train(TINY, separable(100), TrainConfig(epochs=1))
        assert not model.training

    def test_trainlog_csv(self, tmp_path):
        _, log = train(TINY, separable(100), TrainConfig(epochs=2))
        rows = list(csv.reader(open(log.write_csv(tmp_path / "log.csv"))))
        assert rows[0] == ["epoch", "loss", "seconds"]
        assert [int(r[0]) for r in rows[1:]] == [1, 2]
        assert [float(r[1]) for r in rows[1:]] == log.losses


@pytest.fixture(scope="module")
def trained():
    model, _ = train(ModelConfig.default("sttransformer"), separable(200), TrainConfig(epochs=1, batch_size=64))
    return model


class TestPredict:
    def test_length_and_order(self, trained):
        ds = separable(50, seed=3)
        p = predict_proba(trained, ds)
        assert p.shape == (50,) and p.dtype == np.float64
        np.testing.assert_allclose(p[::-1], predict_proba(trained, ds.x[::-1]), rtol=0, atol=1e-6)

    def test_repeatable(self, trained):
        ds = separable(50, seed=3)
        np.testing.assert_array_equal(predict_proba(trained, ds), predict_proba(trained, ds))

    def test_batching_does_not_change_result(self, trained):
        ds = separable(50, seed=3)
        np.testing.assert_allclose(predict_proba(trained, ds, batch_size=7), predict_proba(trained, ds),
                                   rtol=0, atol=1e-6)

    def test_fuzz_10000_inputs(self, trained):
        x = np.random.default_rng(9).normal(0.5, 2.0, (10_000, T, F))
        p = predict_proba(trained, x)
        assert np.all(np.isfinite(p))
        assert np.all((p > 0) & (p < 1))

    def test_restores_training_flag(self, trained):
        trained.train()
        predict_proba(trained, separable(5).x)
        assert trained.training
        trained.eval()

    def test_feature_mismatch(self, trained):
        with pytest.raises(ContractError):
            predict_proba(trained, np.zeros((3, T, F + 2)))
