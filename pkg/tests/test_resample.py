import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypoxbench.errors import ConfigError, ResampleError, WeightingError
from hypoxbench.preprocess import SequenceDataset
from hypoxbench.resample import (
    SmoteConfig, batch_weights, interpolate, k_nearest, sample_batches, smote, smote_plan,
)

from oracles import nearest_neighbors


def dataset(n_major, n_minor, window=3, features=2, seed=0, minority=1):
    rng = np.random.default_rng(seed)
    n = n_major + n_minor
    x = rng.standard_normal((n, window, features))
    y = np.full(n, 1 - minority, dtype=np.int8)
    y[rng.permutation(n)[:n_minor]] = minority
    meta = {"date": np.arange(n).astype("datetime64[D]"), "start_date": np.arange(n).astype("datetime64[D]"),
            "cell_id": np.arange(n), "depth_bin": np.zeros(n, np.int64), "synthetic": np.zeros(n, bool)}
    return SequenceDataset(x, y, meta, window, 1)


class TestInterpolation:
    def test_midpoint(self):
        x, x_nn = np.zeros((1, 6)), np.ones((1, 6))
        np.testing.assert_array_equal(interpolate(x, x_nn, [0.5]), np.full((1, 6), 0.5))

    def test_mu_zero_is_exact_copy(self):
        x = np.random.default_rng(0).standard_normal((3, 4))
        np.testing.assert_array_equal(interpolate(x, x[::-1], np.zeros(3)), x)


class TestNeighbors:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((int(rng.integers(6, 60)), 5))
        np.testing.assert_array_equal(k_nearest(pts, 4), nearest_neighbors(pts, 4))

    def test_ties_go_to_lower_index(self):
        pts = np.array([[0.0], [1.0], [-1.0], [2.0]])
        assert k_nearest(pts, 1)[0, 0] == 1

    def test_chunking_does_not_change_result(self):
        pts = np.random.default_rng(1).standard_normal((50, 6))
        np.testing.assert_array_equal(k_nearest(pts, 5, max_block=100), k_nearest(pts, 5))


class TestSmote:
    def test_count_formula(self):
        out = smote(dataset(100, 10), SmoteConfig(k_neighbors=5, target_ratio=1.0))
        assert len(out) == 200
        assert out.class_counts() == (100, 100)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(20, 120), st.integers(6, 19), st.floats(0.2, 1.0))
    def test_count_formula_property(self, n_major, n_minor, ratio):
        ds = dataset(n_major, n_minor)
        out = smote(ds, SmoteConfig(5, ratio))
        assert len(out) - len(ds) == max(0, math.ceil(ratio * n_major) - n_minor)

    @pytest.mark.parametrize("seed", range(5))
    def test_segments_and_neighbors(self, seed):
        ds = dataset(150, 25, seed=seed)
        cfg = SmoteConfig(k_neighbors=3, rng_seed=seed)
        plan = smote_plan(ds, cfg)
        out = smote(ds, cfg)
        minority = ds.x[plan.minority_index].reshape(len(plan.minority_index), -1)
        oracle = nearest_neighbors(minority, 3)
        new = out.x[len(ds):].reshape(len(plan.base), -1)
        for s, b, p in zip(new, plan.base, plan.partner):
            assert p in oracle[b]
            lo = np.minimum(minority[b], minority[p]) - 1e-12
            hi = np.maximum(minority[b], minority[p]) + 1e-12
            assert np.all((s >= lo) & (s <= hi))

    def test_originals_first_and_unchanged(self):
        ds = dataset(60, 8)
        out = smote(ds, SmoteConfig(k_neighbors=3))
        np.testing.assert_array_equal(out.x[:len(ds)], ds.x)
        np.testing.assert_array_equal(out.y[:len(ds)], ds.y)
        assert not out.meta["synthetic"][:len(ds)].any()
        assert out.meta["synthetic"][len(ds):].all()
        assert (out.y[len(ds):] == 1).all()
        assert out.x.shape[1:] == ds.x.shape[1:]

    def test_minority_label_zero(self):
        out = smote(dataset(40, 10, minority=0), SmoteConfig(k_neighbors=3))
        assert out.class_counts() == (40, 40)

    def test_fixed_seed_reproducible(self):
        ds = dataset(80, 12)
        assert smote(ds, SmoteConfig(3, rng_seed=5)).equals(smote(ds, SmoteConfig(3, rng_seed=5)))
        assert not smote(ds, SmoteConfig(3, rng_seed=5)).equals(smote(ds, SmoteConfig(3, rng_seed=6)))

    def test_too_few_minority(self):
        with pytest.raises(ResampleError):
            smote(dataset(50, 5), SmoteConfig(k_neighbors=5))

    def test_balanced_is_noop(self):
        ds = dataset(20, 20)
        assert smote(ds, SmoteConfig(k_neighbors=3)) is ds

    def test_flatten_reshape_identity(self):
        ds = dataset(10, 10)
        np.testing.assert_array_equal(ds.x.reshape(len(ds), -1).reshape(ds.x.shape), ds.x)

    @pytest.mark.parametrize("kw", [dict(k_neighbors=0), dict(target_ratio=0.0), dict(target_ratio=1.5)])
    def test_invalid_config(self, kw):
        with pytest.raises(ConfigError):
            SmoteConfig(**kw)


class TestWeightedSampling:
    def test_inverse_class_weights(self):
        np.testing.assert_allclose(batch_weights([0, 0, 0, 1]), [1 / 3, 1 / 3, 1 / 3, 1])

    @pytest.mark.parametrize("y", [[0, 0], [1, 1, 1]])
    def test_single_class(self, y):
        with pytest.raises(WeightingError):
            batch_weights(y)

    def test_balanced_draws_from_90_10(self):
        y = np.r_[np.zeros(900, int), np.ones(100, int)]
        idx = np.concatenate(list(sample_batches(batch_weights(y), 1000, rng_seed=0, num_samples=10_000)))
        assert len(idx) == 10_000
        assert 0.47 <= y[idx].mean() <= 0.53

    def test_last_batch_kept(self):
        sizes = [len(b) for b in sample_batches(np.ones(10), 4, rng_seed=0)]
        assert sizes == [4, 4, 2]

    def test_seeded(self):
        w = batch_weights([0, 0, 1, 0, 1])
        a = list(sample_batches(w, 2, rng_seed=3))
        b = list(sample_batches(w, 2, rng_seed=3))
        assert all(np.array_equal(u, v) for u, v in zip(a, b))
