"""Ranking, thresholded and probabilistic evaluation of binary scores.

Conventions
-----------
* A sample is predicted positive when ``score >= threshold``.
* Curves are swept over the distinct scores in descending order.  The ROC
  curve starts at (0, 0) with threshold +inf and ends at (1, 1).  The PR
  curve starts at (recall 0, precision 1) with threshold +inf.
* AUC-ROC is the trapezoidal area, accumulated in integers so it equals the
  Mann-Whitney pair count (ties count 1/2) exactly.
* AUC-PR is average precision: sum over thresholds of
  (R_i - R_{i-1}) * P_i, a step rule rather than the trapezoid.
* Zero-denominator precision or recall is reported as 0 and flagged.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import MetricError, ShapeError


@dataclass(frozen=True)
class Curve:
    kind: str
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray

    def rows(self):
        return zip(self.thresholds.tolist(), self.x.tolist(), self.y.tolist())


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"scores {s.shape} and labels {y.shape} differ in length")
    if not np.all(np.isin(y, (0, 1))):
        raise MetricError("labels must be 0/1")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    return s, y.astype(np.int64)


def threshold_sweep(scores, labels):
    """Cumulative (tp, fp) when predicting positive at each distinct score, descending."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1] if len(s) else np.zeros(0, int)
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    return s[last], tp, fp


def _both_classes(y: np.ndarray) -> tuple[int, int]:
    P = int(y.sum())
    N = len(y) - P
    if P == 0 or N == 0:
        raise MetricError("metric needs both classes present")
    return P, N


def roc_auc(scores, labels) -> tuple[Curve, float]:
    _, y = _check(scores, labels)
    P, N = _both_classes(y)
    thr, tp, fp = threshold_sweep(scores, labels)
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * P * N)
    curve = Curve("ROC", fp / N, tp / P, np.r_[np.inf, thr])
    return curve, auc


def pr_auc(scores, labels) -> tuple[Curve, float]:
    _, y = _check(scores, labels)
    P = int(y.sum())
    if P == 0:
        raise MetricError("AUC-PR needs at least one positive")
    thr, tp, fp = threshold_sweep(scores, labels)
    precision = tp / (tp + fp)
    recall = tp / P
    ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    curve = Curve("PR", np.r_[0.0, recall], np.r_[1.0, precision], np.r_[np.inf, thr])
    return curve, ap


def f1_from_counts(tp, fp, fn):
    tp, fp, fn = (np.asarray(v, dtype=float) for v in (tp, fp, fn))
    den = 2 * tp + fp + fn
    return np.where(den > 0, 2 * tp / np.where(den > 0, den, 1), 0.0)


def optimize_threshold(scores, labels) -> tuple[float, float]:
    """Threshold with maximal F1 among the swept scores; ties go to the
    higher threshold."""
    _, y = _check(scores, labels)
    P, _ = _both_classes(y)
    thr, tp, fp = threshold_sweep(scores, labels)
    f1 = f1_from_counts(tp, fp, P - tp)
    best = int(np.argmax(f1))
    return float(thr[best]), float(f1[best])


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ThresholdReport:
    threshold: float
    confusion: Confusion
    accuracy: float
    precision: float
    recall: float
    f1: float
    precision_undefined: bool
    recall_undefined: bool


def confusion_at(scores, labels, threshold: float) -> Confusion:
    s, y = _check(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return Confusion(tp, fp, len(y) - tp - fp - fn, fn)


def report_from_confusion(c: Confusion, threshold: float = float("nan")) -> ThresholdReport:
    p_den, r_den = c.tp + c.fp, c.tp + c.fn
    precision = c.tp / p_den if p_den else 0.0
    recall = c.tp / r_den if r_den else 0.0
    f1 = float(f1_from_counts(c.tp, c.fp, c.fn))
    acc = (c.tp + c.tn) / c.n if c.n else 0.0
    return ThresholdReport(threshold, c, acc, precision, recall, f1, p_den == 0, r_den == 0)


def classification_report(scores, labels, threshold: float) -> ThresholdReport:
    if not 0.0 <= threshold <= 1.0:
        raise MetricError(f"threshold must be in [0, 1], got {threshold}")
    return report_from_confusion(confusion_at(scores, labels, threshold), threshold)


def _probabilities(scores, labels):
    p, y = _check(scores, labels)
    if p.size == 0:
        raise MetricError("empty input")
    if np.any(p < 0) or np.any(p > 1):
        raise MetricError("probabilities must lie in [0, 1]")
    return p, y


def brier(scores, labels) -> float:
    p, y = _probabilities(scores, labels)
    return float(np.mean((p - y) ** 2))


def log_loss(scores, labels, eps: float = 1e-15) -> float:
    p, y = _probabilities(scores, labels)
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


@dataclass(frozen=True)
class EvalReport:
    auc_roc: float
    auc_pr: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    brier: float
    log_loss: float
    optimal_threshold: float
    confusion: Confusion
    confusion_default: Confusion
    accuracy_default: float
    f1_default: float
    n: int
    positives: int

    def as_row(self) -> dict:
        d = asdict(self)
        c, c0 = d.pop("confusion"), d.pop("confusion_default")
        d.update({f"{k}_opt": v for k, v in c.items()})
        d.update({f"{k}_0.5": v for k, v in c0.items()})
        return d


@dataclass(frozen=True)
class Evaluation:
    report: EvalReport
    roc: Curve
    pr: Curve


def evaluate(scores, labels, default_threshold: float = 0.5) -> Evaluation:
    """Full report for one model on one test set; the thresholded block uses
    the F1-optimal threshold."""
    roc, auc = roc_auc(scores, labels)
    pr, ap = pr_auc(scores, labels)
    thr, _ = optimize_threshold(scores, labels)
    opt = report_from_confusion(confusion_at(scores, labels, thr), thr)
    dflt = classification_report(scores, labels, default_threshold)
    _, y = _check(scores, labels)
    rep = EvalReport(
        auc_roc=auc, auc_pr=ap, accuracy=opt.accuracy, precision=opt.precision, recall=opt.recall,
        f1=opt.f1, brier=brier(scores, labels), log_loss=log_loss(scores, labels),
        optimal_threshold=thr, confusion=opt.confusion, confusion_default=dflt.confusion,
        accuracy_default=dflt.accuracy, f1_default=dflt.f1, n=len(y), positives=int(y.sum()),
    )
    return Evaluation(rep, roc, pr)


def pairwise_auc_oracle(scores, labels) -> float:
    """Brute-force P(score_pos > score_neg) + 1/2 P(tie) over all pairs."""
    s, y = _check(scores, labels)
    pos, neg = s[y == 1], s[y == 0]
    if not len(pos) or not len(neg):
        raise MetricError("metric needs both classes present")
    greater = int(np.sum(pos[:, None] > neg[None, :]))
    ties = int(np.sum(pos[:, None] == neg[None, :]))
    return (2 * greater + ties) / (2 * len(pos) * len(neg))
