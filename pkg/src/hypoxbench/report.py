"""Markdown summary of one benchmark run."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .models import DISPLAY_NAMES
from .stats import PairwiseResult, lookup


@dataclass(frozen=True)
class PeriodSummary:
    name: str
    n: int
    positives: int
    metrics: Mapping[str, Mapping[str, float]]  # arch -> metrics.csv row
    pairwise: Mapping[tuple[str, str], PairwiseResult]


def _fmt(v: float, digits: int = 4) -> str:
    return f"{v:.{digits}f}"


def _p(p: float) -> str:
    return f"{p:.4f}" if p >= 1e-4 else f"{p:.2e}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return out


def render(summaries: Sequence[PeriodSummary], config_digest: str, seed: int) -> str:
    lines = ["# Hypoxia classifier benchmark", "",
             f"Config SHA-256 `{config_digest}`, seed {seed}.", ""]
    for s in summaries:
        archs = list(s.metrics)
        names = [DISPLAY_NAMES.get(a, a) for a in archs]
        lines += [f"## Test period {s.name.replace('_', ' to ')}", "",
                  f"{s.n} sequences, {s.positives} hypoxic ({s.positives / s.n:.1%}).", "",
                  "### Classification (F1-optimal threshold)", ""]
        lines += _table(
            ["Model", "AUC-ROC", "AUC-PR", "Accuracy", "F1", "Precision", "Recall", "Threshold"],
            [[nm, _fmt(m["auc_roc"]), _fmt(m["auc_pr"]), _fmt(m["accuracy"]), _fmt(m["f1"]),
              _fmt(m["precision"]), _fmt(m["recall"]), _fmt(m["optimal_threshold"])]
             for nm, m in zip(names, s.metrics.values())])
        lines += ["", "### Probabilistic accuracy", ""]
        lines += _table(["Model", "Brier score", "Log loss"],
                        [[nm, _fmt(m["brier"]), _fmt(m["log_loss"])]
                         for nm, m in zip(names, s.metrics.values())])
        if s.pairwise:
            lines += ["", "### McNemar p-values", "",
                      "Predictions at each model's optimized threshold; no continuity correction.", ""]
            rows = []
            for a, nm in zip(archs, names):
                row = [nm]
                for b in archs:
                    r = lookup(s.pairwise, a, b)
                    row.append("-" if r is None else _p(r.p_value))
                rows.append(row)
            lines += _table(["", *names], rows)
            lines += ["", "### Effect sizes", ""]
            lines += _table(
                ["Pair", "b", "c", "chi2", "p", "Cohen's w", "Effect", "Significance"],
                [[f"{DISPLAY_NAMES.get(r.model_a, r.model_a)} vs {DISPLAY_NAMES.get(r.model_b, r.model_b)}",
                  str(r.table.b), str(r.table.c), _fmt(r.chi2, 3), _p(r.p_value), _fmt(r.cohens_w),
                  r.effect, r.significance + (" (never disagree)" if r.degenerate else "")]
                 for r in s.pairwise.values()])
        lines.append("")
    return "\n".join(lines)
