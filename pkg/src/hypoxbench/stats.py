"""Paired comparison of classifiers: McNemar's test and Cohen's w."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import ContractError, DegenerateTestError, DomainError

SIGNIFICANT = 0.05
STRONG = 0.001
EFFECT_BANDS = ((0.5, "large"), (0.3, "medium"), (0.1, "small"))


@dataclass(frozen=True)
class ContingencyTable:
    """a: both correct, b: A correct and B wrong, c: A wrong and B correct, d: both wrong."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise DomainError("contingency counts must be non-negative")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


def _binary(v, name: str) -> np.ndarray:
    arr = np.asarray(v).ravel()
    if not np.all(np.isin(arr, (0, 1))):
        raise ContractError(f"{name} must be binary")
    return arr.astype(bool)


def contingency(preds_a, preds_b, labels) -> ContingencyTable:
    pa, pb, y = _binary(preds_a, "preds_a"), _binary(preds_b, "preds_b"), _binary(labels, "labels")
    if not len(pa) == len(pb) == len(y):
        raise ContractError(f"length mismatch: {len(pa)}, {len(pb)}, {len(y)}")
    ok_a, ok_b = pa == y, pb == y
    return ContingencyTable(
        a=int(np.sum(ok_a & ok_b)),
        b=int(np.sum(ok_a & ~ok_b)),
        c=int(np.sum(~ok_a & ok_b)),
        d=int(np.sum(~ok_a & ~ok_b)),
    )


def chi2_sf_df1(x: float) -> float:
    """Survival function of the one-degree-of-freedom chi-square distribution.

    P(Z^2 > x) for standard normal Z equals erfc(sqrt(x / 2)).
    """
    if x < 0 or math.isnan(x):
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar(table: ContingencyTable, continuity: bool = False) -> tuple[float, float]:
    """(b - c)^2 / (b + c), or (|b - c| - 1)^2 / (b + c) with ``continuity``."""
    b, c = table.b, table.c
    if b + c == 0:
        raise DegenerateTestError("the two classifiers never disagree (b = c = 0)")
    diff = abs(b - c)
    if continuity:
        diff = max(diff - 1, 0)
    chi2 = diff * diff / (b + c)
    return float(chi2), chi2_sf_df1(chi2)


def cohens_w(chi2: float, n: int) -> float:
    if n <= 0:
        raise DomainError("Cohen's w needs N > 0")
    if chi2 < 0:
        raise DomainError("chi-square statistic must be >= 0")
    return math.sqrt(chi2 / n)


def effect_label(w: float) -> str:
    for bound, label in EFFECT_BANDS:
        if w >= bound:
            return label
    return "negligible"


def significance_label(p: float, alpha: float = SIGNIFICANT) -> str:
    if p < STRONG:
        return "strong"
    if p < alpha:
        return "significant"
    return "not significant"


@dataclass(frozen=True)
class PairwiseResult:
    model_a: str
    model_b: str
    chi2: float
    p_value: float
    cohens_w: float
    n: int
    table: ContingencyTable
    degenerate: bool = False

    @property
    def effect(self) -> str:
        return effect_label(self.cohens_w)

    @property
    def significance(self) -> str:
        return significance_label(self.p_value)


def compare_pair(name_a: str, name_b: str, preds_a, preds_b, labels,
                 continuity: bool = False) -> PairwiseResult:
    """McNemar plus effect size for one pair.

    Classifiers that never disagree get chi2 = 0, p = 1 and ``degenerate``
    set, so a full matrix can still be emitted.
    """
    t = contingency(preds_a, preds_b, labels)
    try:
        chi2, p = mcnemar(t, continuity)
        degenerate = False
    except DegenerateTestError:
        chi2, p, degenerate = 0.0, 1.0, True
    return PairwiseResult(name_a, name_b, chi2, p, cohens_w(chi2, t.n), t.n, t, degenerate)


def pairwise_compare(predictions: Mapping[str, np.ndarray], labels,
                     continuity: bool = False) -> dict[tuple[str, str], PairwiseResult]:
    """Every unordered pair of models, keyed in the mapping's order."""
    if len(predictions) < 2:
        raise ContractError("pairwise comparison needs at least two models")
    n = len(np.asarray(labels).ravel())
    for name, p in predictions.items():
        if len(np.asarray(p).ravel()) != n:
            raise ContractError(f"predictions for {name!r} are not aligned with the labels")
    return {
        (a, b): compare_pair(a, b, predictions[a], predictions[b], labels, continuity)
        for a, b in itertools.combinations(predictions, 2)
    }


def lookup(results: Mapping[tuple[str, str], PairwiseResult], a: str, b: str) -> Optional[PairwiseResult]:
    """Symmetric access into a pairwise result map; ``None`` on the diagonal."""
    if a == b:
        return None
    return results.get((a, b)) or results.get((b, a))
