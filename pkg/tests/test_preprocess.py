import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypoxbench.dataio import HindcastSet, SynthConfig, generate_synthetic
from hypoxbench.errors import DomainError, FitError, SplitError
from hypoxbench.preprocess import (
    FeatureTable, PrepConfig, ScalerParams, binarize, build_sequences, contiguous_runs, encode_cyclical,
    expected_count, featurize, fit_scaler, load_dataset, prepare, save_dataset, scale_values,
    temporal_split,
)


def make_set(dates, cells=(0,), depth=None, pea=None, do=None):
    """One record per (date, cell) with simple driver values."""
    rows = []
    for c in cells:
        for i, d in enumerate(dates):
            rows.append(dict(date=d, cell_id=c, depth_bin=(depth or {}).get(c, 0), lon=0.0, lat=0.0,
                             pea=float(pea[i]) if pea is not None else 1.0 + i, soc=2.0, dcp_temp=0.1,
                             do_bottom=float(do[i]) if do is not None else 5.0, land=False))
    return HindcastSet(pd.DataFrame(rows))


def day_range(start: dt.date, n: int):
    return [start + dt.timedelta(days=i) for i in range(n)]


def table(n_days: int, n_features: int = 2) -> FeatureTable:
    dates = np.arange(np.datetime64("2020-07-01"), np.datetime64("2020-07-01") + n_days)
    feats = np.arange(n_days * n_features, dtype=float).reshape(n_days, n_features)
    return FeatureTable(feats, (np.arange(n_days) % 2).astype(np.int8), dates, np.zeros(n_days, np.int64),
                        np.zeros(n_days, np.int64), np.zeros(n_days, bool),
                        tuple(f"f{i}" for i in range(n_features)))


class TestBinarize:
    @pytest.mark.parametrize("do,label", [(1.5, 1), (3.7, 0), (2.0, 0), (0.0, 1)])
    def test_strict_threshold(self, do, label):
        assert binarize(do) == label

    def test_inclusive_flag(self):
        assert binarize(2.0, inclusive=True) == 1

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            binarize(-0.1)

    def test_array(self):
        np.testing.assert_array_equal(binarize(np.array([1.0, 2.0, 2.5])), [1, 0, 0])


class TestCyclical:
    def test_day_zero(self):
        s, c, _, _ = encode_cyclical(0, 365, 1)
        assert s == 0.0 and c == 1.0

    def test_quarter_cycle(self):
        s, c, _, _ = encode_cyclical(91, 364, 4)
        assert s == pytest.approx(1.0, abs=1e-12)
        assert c == pytest.approx(0.0, abs=1e-12)

    def test_year_end_continuity(self):
        a = np.array(encode_cyclical(364, 365, 12)[:2])
        b = np.array(encode_cyclical(0, 365, 12)[:2])
        assert np.all(np.abs(a - b) < 0.02)

    @pytest.mark.parametrize("day,length", [(-1, 365), (365, 365)])
    def test_out_of_range(self, day, length):
        with pytest.raises(DomainError):
            encode_cyclical(day, length, 1)

    @settings(max_examples=200)
    @given(st.floats(0, 365.999), st.integers(1, 12))
    def test_unit_circle(self, day, month):
        s, c, ms, mc = encode_cyclical(day, 366, month)
        assert abs(s * s + c * c - 1) < 1e-9
        assert abs(ms * ms + mc * mc - 1) < 1e-9


class TestScaler:
    def test_linear_map(self):
        np.testing.assert_allclose(scale_values([2, 4, 6], 2, 6), [0, 0.5, 1])

    def test_constant_maps_to_zero(self):
        np.testing.assert_array_equal(scale_values([5, 5, 5], 5, 5), [0, 0, 0])

    def test_no_clipping(self):
        assert scale_values(8, 2, 6) == pytest.approx(1.5)

    def test_fit_per_depth_bin(self):
        dates = day_range(dt.date(2020, 7, 1), 3)
        hs = make_set(dates, cells=(0, 1), depth={1: 1}, pea=[2, 4, 6])
        p = fit_scaler(hs)
        assert set(p.mins) == {0, 1}
        assert p.mins[0][0] == 2 and p.maxs[0][0] == 6

    def test_empty_depth_bin(self):
        hs = make_set(day_range(dt.date(2020, 7, 1), 3))
        with pytest.raises(FitError):
            fit_scaler(hs, depth_bins=[0, 1])

    def test_train_features_in_unit_interval(self):
        hs = generate_synthetic(SynthConfig(n_cells=30, n_days=40))
        train, _ = temporal_split(hs, [(dt.date(2020, 7, 1), dt.date(2020, 8, 31))])
        ft = featurize(train, fit_scaler(train))
        water = ~ft.land
        assert ft.features[water, :3].min() >= 0.0
        assert ft.features[water, :3].max() <= 1.0

    def test_dict_round_trip(self):
        p = ScalerParams({0: np.array([1.0, 2.0, 3.0])}, {0: np.array([4.0, 5.0, 6.0])})
        q = ScalerParams.from_dict(p.to_dict())
        np.testing.assert_array_equal(q.mins[0], p.mins[0])
        assert q.features == p.features


class TestSplit:
    def test_all_dates_in_test(self):
        hs = make_set(day_range(dt.date(2020, 7, 1), 5))
        with pytest.raises(SplitError):
            temporal_split(hs, [(dt.date(2020, 1, 1), dt.date(2020, 12, 31))])

    def test_year_split_counts(self):
        hs = make_set(day_range(dt.date(2009, 1, 1), 365 + 365))
        train, test = temporal_split(hs, [(dt.date(2010, 1, 1), dt.date(2010, 12, 31))])
        assert len(train) == 365
        assert len(test) == 365

    def test_disjoint(self):
        hs = generate_synthetic(SynthConfig(n_cells=10, n_days=40))
        train, test = temporal_split(hs, [(dt.date(2020, 7, 5), dt.date(2020, 7, 12))])
        key = lambda h: set(zip(h.column("date").tolist(), h.column("cell_id").tolist()))  # noqa: E731
        assert not key(train) & key(test)
        assert len(train) + len(test) == len(hs)

    def test_overlapping_periods(self):
        hs = make_set(day_range(dt.date(2020, 7, 1), 30))
        with pytest.raises(SplitError):
            temporal_split(hs, [(dt.date(2020, 7, 1), dt.date(2020, 7, 10)),
                                (dt.date(2020, 7, 10), dt.date(2020, 7, 20))])


class TestSequences:
    @pytest.mark.parametrize("days,window,lead,count", [(10, 7, 1, 3), (7, 7, 0, 1), (7, 7, 1, 0)])
    def test_counts(self, days, window, lead, count):
        assert len(build_sequences(table(days), window, lead)) == count

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 10), st.integers(0, 3))
    def test_closed_form_count(self, days, window, lead):
        ds = build_sequences(table(days), window, lead)
        assert len(ds) == expected_count(days, window, lead) == max(0, days - window - lead + 1)
        assert ds.x.shape[1:] == (window, 2)

    def test_window_contents_and_label_alignment(self):
        t = table(10)
        ds = build_sequences(t, window=3, lead=2)
        # sample 0 covers days 0..2, target day 4
        np.testing.assert_array_equal(ds.x[0], t.features[0:3])
        assert ds.y[0] == t.labels[4]
        assert ds.meta["date"][0] == t.date[4]
        assert ds.meta["start_date"][0] == t.date[0]

    def test_gap_splits_runs(self):
        t = table(12)
        keep = np.r_[0:5, 7:12]
        t = FeatureTable(t.features[keep], t.labels[keep], t.date[keep], t.cell_id[keep], t.depth_bin[keep],
                         t.land[keep], t.feature_names)
        assert len(contiguous_runs(t.date)) == 2
        ds = build_sequences(t, window=3, lead=1)
        assert len(ds) == 2 * expected_count(5, 3, 1)

    def test_short_run_skipped_and_counted(self):
        ds = build_sequences(table(4), window=7, lead=1)
        assert len(ds) == 0 and ds.skipped == 1

    def test_land_cells_excluded(self):
        hs = generate_synthetic(SynthConfig(n_cells=20, n_days=30))
        prep = prepare(hs, [(dt.date(2020, 7, 1), dt.date(2020, 8, 31))])
        land_cells = set(np.unique(hs.column("cell_id")[hs.column("land")]).tolist())
        assert land_cells
        assert not land_cells & set(prep.train.meta["cell_id"].tolist())

    def test_invalid_window(self):
        with pytest.raises(DomainError):
            build_sequences(table(5), window=0)


@pytest.fixture(scope="module")
def prepared():
    hs = generate_synthetic(SynthConfig(n_cells=30, n_days=60))
    return prepare(hs, [(dt.date(2020, 7, 1), dt.date(2020, 7, 31))]), hs


class TestPrepare:
    def test_no_training_target_in_test_period(self, prepared):
        prep, _ = prepared
        d = prep.train.meta["date"]
        inside = (d >= np.datetime64("2020-07-01")) & (d <= np.datetime64("2020-07-31"))
        assert not inside.any()

    def test_test_windows_stay_inside_period(self, prepared):
        prep, _ = prepared
        ds = next(iter(prep.tests.values()))
        assert ds.meta["start_date"].min() >= np.datetime64("2020-07-01")
        assert ds.meta["date"].max() <= np.datetime64("2020-07-31")

    def test_feature_layout(self, prepared):
        prep, _ = prepared
        assert prep.train.feature_names == ("pea_n", "soc_n", "dcp_n", "doy_sin", "doy_cos",
                                            "month_sin", "month_cos")
        assert prep.train.x.shape[1:] == (7, 7)

    def test_hour_encoding_flag(self):
        hs = generate_synthetic(SynthConfig(n_cells=10, n_days=30))
        prep = prepare(hs, [(dt.date(2020, 7, 1), dt.date(2020, 7, 31))], PrepConfig(hour_encoding=True))
        assert prep.train.n_features == 9

    def test_cyclical_identity_in_dataset(self, prepared):
        prep, _ = prepared
        x = prep.train.x
        for i, j in ((3, 4), (5, 6)):
            np.testing.assert_allclose(x[..., i] ** 2 + x[..., j] ** 2, 1.0, atol=1e-9)

    def test_dataset_round_trip(self, prepared, tmp_path):
        prep, _ = prepared
        save_dataset(prep.train, tmp_path / "t.ckpt")
        back = load_dataset(tmp_path / "t.ckpt")
        assert back.equals(prep.train)
        assert back.feature_names == prep.train.feature_names
