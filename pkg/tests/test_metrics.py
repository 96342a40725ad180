import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hypoxbench.errors import MetricError, ShapeError
from hypoxbench.metrics import (
    Confusion, brier, classification_report, confusion_at, evaluate, log_loss, optimize_threshold,
    pairwise_auc_oracle, pr_auc, report_from_confusion, roc_auc,
)

from oracles import auc_by_pairs, average_precision, best_f1_on_grid, f1_at


@st.composite
def scored_labels(draw, max_size=60):
    n = draw(st.integers(2, max_size))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda v: 0 < sum(v) < len(v)))
    # a coarse grid forces plenty of ties
    scores = draw(st.lists(st.integers(0, 10).map(lambda k: k / 10), min_size=n, max_size=n))
    return scores, labels


class TestRocAuc:
    S = (0.9, 0.8, 0.3, 0.1)

    @pytest.mark.parametrize("labels,auc", [((1, 1, 0, 0), 1.0), ((0, 1, 0, 1), 0.25), ((0, 0, 1, 1), 0.0)])
    def test_examples(self, labels, auc):
        assert roc_auc(self.S, labels)[1] == auc
        assert auc_by_pairs(self.S, labels) == auc

    def test_curve_endpoints(self):
        curve, _ = roc_auc(self.S, (0, 1, 0, 1))
        assert (curve.x[0], curve.y[0]) == (0.0, 0.0)
        assert (curve.x[-1], curve.y[-1]) == (1.0, 1.0)
        assert curve.thresholds[0] == np.inf
        assert np.all(np.diff(curve.x) >= 0) and np.all(np.diff(curve.y) >= 0)

    def test_ties_count_half(self):
        assert roc_auc([0.5, 0.5], [1, 0])[1] == 0.5

    @pytest.mark.parametrize("labels", [(1, 1, 1), (0, 0)])
    def test_one_class(self, labels):
        with pytest.raises(MetricError):
            roc_auc([0.1] * len(labels), labels)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            roc_auc([0.1, 0.2], [1])

    @settings(max_examples=200, deadline=None)
    @given(scored_labels())
    def test_equals_pair_oracle(self, case):
        scores, labels = case
        auc = roc_auc(scores, labels)[1]
        assert auc == auc_by_pairs(scores, labels)
        assert auc == pairwise_auc_oracle(scores, labels)

    @settings(max_examples=100, deadline=None)
    @given(scored_labels(), st.sampled_from([np.exp, np.arctan, lambda s: 3 * s - 7, lambda s: s ** 3]))
    def test_monotone_invariance(self, case, fn):
        scores, labels = case
        assert roc_auc(fn(np.array(scores)), labels)[1] == roc_auc(scores, labels)[1]


class TestPrAuc:
    def test_perfect(self):
        assert pr_auc((0.9, 0.8, 0.3, 0.1), (1, 1, 0, 0))[1] == 1.0

    @pytest.mark.parametrize("n_pos,n", [(1, 4), (3, 10), (7, 7 + 13)])
    def test_constant_score_equals_base_rate(self, n_pos, n):
        labels = [1] * n_pos + [0] * (n - n_pos)
        assert pr_auc([0.5] * n, labels)[1] == pytest.approx(n_pos / n, abs=1e-15)
        assert average_precision([0.5] * n, labels) == pytest.approx(n_pos / n, abs=1e-15)

    def test_single_positive_ranked_first(self):
        assert pr_auc((0.9, 0.5, 0.4, 0.1), (1, 0, 0, 0))[1] == 1.0

    def test_curve_conventions(self):
        curve, _ = pr_auc((0.9, 0.8, 0.3, 0.1), (0, 1, 0, 1))
        assert (curve.x[0], curve.y[0]) == (0.0, 1.0)
        assert curve.x[-1] == 1.0

    def test_no_positives(self):
        with pytest.raises(MetricError):
            pr_auc([0.2, 0.3], [0, 0])

    @settings(max_examples=150, deadline=None)
    @given(scored_labels())
    def test_matches_enumeration(self, case):
        scores, labels = case
        assert pr_auc(scores, labels)[1] == pytest.approx(average_precision(scores, labels), abs=1e-12)


class TestOptimizeThreshold:
    def test_example(self):
        thr, f1 = optimize_threshold((0.9, 0.6, 0.4), (1, 1, 0))
        assert (thr, f1) == (0.6, 1.0)

    @pytest.mark.parametrize("n_pos,n", [(1, 4), (2, 5), (5, 20)])
    def test_inverted_ranking_predicts_all(self, n_pos, n):
        scores = np.linspace(0.05, 0.95, n)
        labels = [1] * n_pos + [0] * (n - n_pos)
        pi = n_pos / n
        _, f1 = optimize_threshold(scores, labels)
        assert f1 == pytest.approx(2 * pi / (pi + 1), abs=1e-12)
        assert best_f1_on_grid(scores.tolist(), labels) == pytest.approx(2 * pi / (pi + 1), abs=1e-12)

    def test_symmetric_perfect(self):
        assert optimize_threshold((0.2, 0.8), (0, 1))[1] == 1.0

    def test_tie_goes_to_higher_threshold(self):
        # thresholds 0.9 and 0.6 both give F1 = 2/3, the others less
        scores, labels = (0.9, 0.8, 0.7, 0.6), (1, 0, 0, 1)
        assert f1_at(scores, labels, 0.9) == f1_at(scores, labels, 0.6) == best_f1_on_grid(scores, labels)
        assert optimize_threshold(scores, labels) == (0.9, pytest.approx(2 / 3))

    def test_one_class(self):
        with pytest.raises(MetricError):
            optimize_threshold([0.1, 0.2], [1, 1])

    @settings(max_examples=200, deadline=None)
    @given(scored_labels())
    def test_matches_grid_maximum(self, case):
        scores, labels = case
        thr, f1 = optimize_threshold(scores, labels)
        assert f1 == pytest.approx(best_f1_on_grid(scores, labels), abs=1e-12)
        assert f1 == pytest.approx(f1_at(scores, labels, thr), abs=1e-12)


class TestClassificationReport:
    def test_perfect(self):
        r = classification_report((0.9, 0.7, 0.2), (1, 1, 0), 0.5)
        assert (r.accuracy, r.f1, r.confusion.fp, r.confusion.fn) == (1.0, 1.0, 0, 0)

    def test_all_negative_flags_precision(self):
        r = classification_report((0.1, 0.2, 0.3), (1, 0, 0), 0.5)
        assert r.recall == 0.0 and r.precision == 0.0
        assert r.precision_undefined and not r.recall_undefined

    def test_arithmetic(self):
        r = report_from_confusion(Confusion(tp=3, fp=1, tn=5, fn=1))
        assert (r.precision, r.recall, r.f1, r.accuracy) == (0.75, 0.75, 0.75, 0.8)

    def test_threshold_is_inclusive(self):
        c = confusion_at((0.5, 0.49), (1, 0), 0.5)
        assert (c.tp, c.fp) == (1, 0)

    @pytest.mark.parametrize("thr", [-0.1, 1.5])
    def test_threshold_range(self, thr):
        with pytest.raises(MetricError):
            classification_report((0.1,), (1,), thr)

    @settings(max_examples=100, deadline=None)
    @given(scored_labels(), st.floats(0, 1))
    def test_counts_and_rates(self, case, thr):
        scores, labels = case
        r = classification_report(scores, labels, thr)
        assert r.confusion.n == len(labels)
        for v in (r.accuracy, r.precision, r.recall, r.f1):
            assert 0.0 <= v <= 1.0


class TestProbabilistic:
    def test_brier_examples(self):
        assert brier((1.0, 0.0), (1, 0)) == 0.0
        assert brier((0.5, 0.5, 0.5), (1, 0, 1)) == 0.25
        assert brier((0.8, 0.4), (1, 0)) == pytest.approx(0.10, abs=1e-15)

    def test_log_loss_examples(self):
        assert log_loss((0.5, 0.5), (1, 0)) == pytest.approx(0.693147, abs=1e-6)
        assert log_loss((0.9,), (1,)) == pytest.approx(0.105361, abs=1e-6)
        assert log_loss((1.0, 0.0), (1, 0)) == pytest.approx(-math.log1p(-1e-15), rel=1e-6)

    @pytest.mark.parametrize("fn", [brier, log_loss])
    def test_empty(self, fn):
        with pytest.raises(MetricError):
            fn([], [])

    @pytest.mark.parametrize("fn", [brier, log_loss])
    def test_out_of_range(self, fn):
        with pytest.raises(MetricError):
            fn([1.2], [1])

    @pytest.mark.parametrize("fn", [brier, log_loss])
    @pytest.mark.parametrize("rate", [0.1, 0.37, 0.8])
    def test_constant_predictor_minimized_at_base_rate(self, fn, rate):
        n = 1000
        labels = [1] * round(rate * n) + [0] * (n - round(rate * n))
        res = minimize_scalar(lambda c: fn([c] * n, labels), bounds=(1e-6, 1 - 1e-6), method="bounded",
                              options={"xatol": 1e-9})
        assert res.x == pytest.approx(rate, abs=1e-5)
        grid = np.linspace(0.001, 0.999, 999)
        assert grid[np.argmin([fn([c] * n, labels) for c in grid])] == pytest.approx(rate, abs=1e-3)


class TestEvaluate:
    def test_report_consistency(self):
        rng = np.random.default_rng(0)
        labels = (rng.random(300) < 0.2).astype(int)
        scores = np.clip(0.3 * labels + rng.uniform(0, 0.7, 300), 0, 1)
        ev = evaluate(scores, labels)
        rep = ev.report
        assert rep.n == 300 and rep.positives == labels.sum()
        assert rep.confusion.n == rep.confusion_default.n == 300
        assert rep.auc_roc == roc_auc(scores, labels)[1]
        assert (rep.optimal_threshold, rep.f1) == optimize_threshold(scores, labels)
        row = rep.as_row()
        assert row["tp_opt"] == rep.confusion.tp and row["fn_0.5"] == rep.confusion_default.fn
        assert len(list(ev.roc.rows())) == len(ev.roc.x)
