"""Static SVG figures.

Output is byte-reproducible: the SVG id salt is fixed, the creation date is
omitted and text is kept as ``<text>`` rather than glyph paths.  Each file
carries the plotted numbers in a leading XML comment so the figure can be
diffed or re-plotted without the CSVs.
"""
from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import Confusion, Curve  # noqa: E402
from .stats import PairwiseResult, lookup  # noqa: E402

_RC = {
    "svg.hashsalt": "hypoxbench",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _data_comment(lines: Sequence[str]) -> str:
    body = "\n".join(s.replace("--", "- -") for s in lines)
    return f"<!-- data\n{body}\n-->\n"


def save_svg(fig, path, data_lines: Sequence[str]) -> Path:
    """Write ``fig`` atomically with the data comment after the XML prolog."""
    path = Path(path)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    svg = buf.getvalue()
    cut = svg.index("?>") + 3 if svg.startswith("<?xml") else 0
    svg = svg[:cut] + _data_comment(data_lines) + svg[cut:]
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(svg)
    tmp.replace(path)
    return path


def curves_figure(curves: Mapping[str, Curve], path, title: str) -> Path:
    """ROC or PR curves of several models on one set of axes."""
    kind = next(iter(curves.values())).kind
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        lines = ["model,x,y"]
        for name, c in curves.items():
            if kind == "PR":
                # step rule: precision holds until the next recall value
                ax.step(c.x, c.y, where="post", label=name, lw=1.2)
            else:
                ax.plot(c.x, c.y, label=name, lw=1.2)
            lines += [f"{name},{x!r},{y!r}" for x, y in zip(c.x.tolist(), c.y.tolist())]
        if kind == "ROC":
            ax.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls="--")
            ax.set_xlabel("False positive rate")
            ax.set_ylabel("True positive rate")
        else:
            ax.set_xlabel("Recall")
            ax.set_ylabel("Precision")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_title(title)
        ax.legend(loc="lower right" if kind == "ROC" else "lower left", frameon=False)
        fig.tight_layout()
        return save_svg(fig, path, lines)


def confusion_figure(matrices: Mapping[str, Confusion], path, title: str) -> Path:
    """One 2x2 panel per model, rows = truth, columns = prediction."""
    n = len(matrices)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, n, figsize=(2.3 * n, 2.5), squeeze=False)
        lines = ["model,tp,fp,tn,fn"]
        for ax, (name, c) in zip(axes[0], matrices.items()):
            m = np.array([[c.tn, c.fp], [c.fn, c.tp]])
            ax.imshow(m, cmap="Blues")
            for (i, j), v in np.ndenumerate(m):
                ax.text(j, i, str(v), ha="center", va="center",
                        color="white" if v > m.max() / 2 else "black")
            ax.set_xticks([0, 1], ["normoxic", "hypoxic"])
            ax.set_yticks([0, 1], ["normoxic", "hypoxic"])
            ax.set_xlabel("predicted")
            ax.set_title(name)
            lines.append(f"{name},{c.tp},{c.fp},{c.tn},{c.fn}")
        axes[0][0].set_ylabel("observed")
        fig.suptitle(title)
        fig.tight_layout()
        return save_svg(fig, path, lines)


def mcnemar_figure(names: Sequence[str], results: Mapping[tuple[str, str], PairwiseResult],
                   path, title: str) -> Path:
    """Heat map of pairwise p-values (colour on -log10 p), diagonal blank."""
    n = len(names)
    p = np.full((n, n), np.nan)
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            r = lookup(results, a, b)
            if r is not None:
                p[i, j] = r.p_value
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(1.2 * n + 1.8, 1.1 * n + 1.2))
        shade = -np.log10(np.clip(p, 1e-300, 1.0))
        im = ax.imshow(np.ma.masked_invalid(np.minimum(shade, 10)), cmap="viridis", vmin=0, vmax=10)
        for i in range(n):
            for j in range(n):
                txt = "" if i == j else _p_text(p[i, j])
                ax.text(j, i, txt, ha="center", va="center", fontsize=8,
                        color="white" if i != j and shade[i, j] < 5 else "black")
        ax.set_xticks(range(n), names, rotation=30, ha="right")
        ax.set_yticks(range(n), names)
        fig.colorbar(im, ax=ax, label="-log10 p (capped at 10)")
        ax.set_title(title)
        fig.tight_layout()
        lines = ["model_a,model_b,chi2,p_value,cohens_w"] + [
            f"{r.model_a},{r.model_b},{r.chi2!r},{r.p_value!r},{r.cohens_w!r}" for r in results.values()]
        return save_svg(fig, path, lines)


def _p_text(p: float) -> str:
    if math.isnan(p):
        return ""
    return f"{p:.3f}" if p >= 0.001 else f"{p:.1e}"


def loss_figure(losses: Mapping[str, Sequence[float]], path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        lines = ["model,epoch,loss"]
        for name, ls in losses.items():
            ax.plot(range(1, len(ls) + 1), ls, label=name, lw=1.2)
            lines += [f"{name},{i},{v!r}" for i, v in enumerate(ls, 1)]
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean training loss")
        ax.legend(frameon=False)
        fig.tight_layout()
        return save_svg(fig, path, lines)
