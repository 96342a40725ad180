"""Benchmark steps behind the CLI subcommands.

Each step reads the previous step's files from the run directory and writes
its own; ``bench`` is the steps in order.  Layout under the run directory::

    manifest.json            config hash, seed, versions, files per step
    config.yaml              resolved configuration
    data/hindcast.csv        synthetic source (synth step only)
    data/train.ckpt          training windows
    data/test_<period>.ckpt  one test set per period
    data/scaler.json         min-max parameters fitted on train
    models/<arch>.ckpt       final-epoch weights
    models/<arch>_trainlog.csv
    eval/<period>/...        metrics.csv, scores/curves per model, SVG figures
    compare/<period>/...     mcnemar.csv, mcnemar.svg
    report.md
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import platform
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from . import __version__, plotting
from .config import RunConfig
from .dataio import generate_synthetic, load_hindcast, write_hindcast
from .errors import UsageError
from .metrics import Confusion, Curve, evaluate
from .models import DISPLAY_NAMES, load_model, save_model
from .preprocess import load_dataset, prepare, save_dataset
from .report import PeriodSummary, render
from .resample import SmoteConfig, smote
from .stats import pairwise_compare
from .training import predict_proba, smote_seed, train

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class RunDir:
    """Run directory that records what each step writes and deletes those
    files again if the step fails."""

    def __init__(self, root, cfg: RunConfig):
        self.root = Path(root)
        self.cfg = cfg
        self._written: list[Path] = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self._written.append(p)
        return p

    def existing(self, rel: str, produced_by: str) -> Path:
        p = self.root / rel
        if not p.exists():
            raise UsageError(f"missing {p}; run `{produced_by}` first")
        return p

    @contextmanager
    def step(self, name: str):
        self._written = []
        try:
            yield self
        except BaseException:
            for p in self._written:
                for q in (p, p.with_name(p.name + ".tmp")):
                    if q.exists():
                        q.unlink()
            raise
        self._record(name)

    def _record(self, name: str) -> None:
        mpath = self.root / MANIFEST
        manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
        if manifest.get("config_sha256") not in (None, self.cfg.digest()):
            # a different config owns this directory; start over
            manifest = {}
        manifest.update(config_sha256=self.cfg.digest(), seed=self.cfg.seed, versions=versions())
        files = sorted({p.relative_to(self.root).as_posix() for p in self._written})
        manifest.setdefault("steps", {})[name] = files
        manifest["steps"] = dict(sorted(manifest["steps"].items()))
        _atomic_text(mpath, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        d = self.cfg.to_dict()
        d.pop("output_dir")
        _atomic_text(self.root / "config.yaml", yaml.safe_dump(d, sort_keys=False))


def versions() -> dict:
    import matplotlib
    import pandas
    import scipy
    return {"hypoxbench": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pandas.__version__,
            "matplotlib": matplotlib.__version__, "pyyaml": yaml.__version__}


def _atomic_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    tmp.replace(path)
    return path


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _archs(cfg: RunConfig, model: Optional[str]) -> list[str]:
    if model in (None, "all"):
        return list(cfg.models)
    if model not in cfg.models:
        raise UsageError(f"model {model!r} is not enabled in the config (enabled: {list(cfg.models)})")
    return [model]


def _period_names(cfg: RunConfig) -> list[str]:
    return [f"{a.isoformat()}_{b.isoformat()}" for a, b in cfg.periods()]


# --------------------------------------------------------------------------
# steps

def run_synth(run: RunDir) -> Path:
    if run.cfg.synthetic is None:
        raise UsageError("config reads data from a file; nothing to synthesize")
    with run.step("synth"):
        hs = generate_synthetic(run.cfg.synthetic)
        out = write_hindcast(hs, run.path("data/hindcast.csv"))
    log.info("wrote %s (%d records)", out, len(hs))
    return out


def _source(run: RunDir) -> Path:
    if run.cfg.data_path:
        p = Path(run.cfg.data_path)
        if not p.exists():
            raise UsageError(f"hindcast file not found: {p}")
        return p
    return run.existing("data/hindcast.csv", "synth")


def run_prepare(run: RunDir):
    cfg = run.cfg
    with run.step("prepare"):
        prep = prepare(load_hindcast(_source(run)), cfg.periods(), cfg.prep)
        save_dataset(prep.train, run.path("data/train.ckpt"))
        if cfg.train.use_smote:
            resampled = smote(prep.train, SmoteConfig(cfg.train.smote_k, cfg.train.smote_ratio,
                                                      smote_seed(cfg.train.seed)))
            save_dataset(resampled, run.path("data/train_smote.ckpt"))
        for name, ds in prep.tests.items():
            save_dataset(ds, run.path(f"data/test_{name}.ckpt"))
        _atomic_text(run.path("data/scaler.json"), json.dumps(prep.scaler.to_dict(), indent=2) + "\n")
    log.info("train %s, tests %s", prep.train.x.shape, {k: v.x.shape for k, v in prep.tests.items()})
    return prep


def run_train(run: RunDir, model: Optional[str] = None) -> dict:
    cfg = run.cfg
    ds = load_dataset(run.existing("data/train.ckpt", "prepare"))
    logs = {}
    with run.step("train" if model in (None, "all") else f"train:{model}"):
        for arch in _archs(cfg, model):
            m, tlog = train(cfg.model_config(arch), ds, cfg.train)
            save_model(m, run.path(f"models/{arch}.ckpt"), {"train": dataclasses.asdict(cfg.train)})
            tlog.write_csv(run.path(f"models/{arch}_trainlog.csv"))
            logs[arch] = tlog
            log.info("%s trained, final loss %.5f", arch, tlog.losses[-1])
    return logs


def run_evaluate(run: RunDir, model: Optional[str] = None) -> dict:
    cfg = run.cfg
    archs = _archs(cfg, model)
    ckpts = {a: run.existing(f"models/{a}.ckpt", f"train --model {a}") for a in archs}
    results = {}
    with run.step("evaluate" if model in (None, "all") else f"evaluate:{model}"):
        models = {a: load_model(p)[0] for a, p in ckpts.items()}
        for period in _period_names(cfg):
            ds = load_dataset(run.existing(f"data/test_{period}.ckpt", "prepare"))
            base = f"eval/{period}"
            rows, rocs, prs, confs = [], {}, {}, {}
            for arch, m in models.items():
                scores = predict_proba(m, ds)
                ev = evaluate(scores, ds.y)
                results[(period, arch)] = ev
                _write_csv(run.path(f"{base}/scores_{arch}.csv"), ["cell_id", "date", "label", "score"],
                           zip(ds.meta["cell_id"].tolist(), ds.meta["date"].astype(str).tolist(),
                               ds.y.tolist(), scores.tolist()))
                for c in (ev.roc, ev.pr):
                    _write_curve(run.path(f"{base}/{c.kind.lower()}_{arch}.csv"), c)
                rows.append({"model": arch, **ev.report.as_row()})
                label = DISPLAY_NAMES[arch]
                rocs[label], prs[label], confs[label] = ev.roc, ev.pr, ev.report.confusion
            _merge_metrics(run.path(f"{base}/metrics.csv"), rows, cfg.models)
            # figures cover every model evaluated so far in this run directory
            everything = _load_metrics(run.root / base / "metrics.csv")
            _figures(run, base, everything, rocs, prs, confs)
        _loss_figure(run)
    return results


def _write_curve(path: Path, c: Curve) -> None:
    _write_csv(path, ["threshold", "x", "y"], c.rows())


def _read_curve(path: Path, kind: str) -> Curve:
    rows = _read_csv(path)
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return Curve(kind, col("x"), col("y"), col("threshold"))


def _merge_metrics(path: Path, rows: list[dict], order: Sequence[str]) -> None:
    """Insert or replace rows for the given models, keeping config order."""
    old = {r["model"]: r for r in _read_csv(path)} if path.exists() else {}
    for r in rows:
        old[r["model"]] = r
    header = list(rows[0])
    _write_csv(path, header, ([old[m][k] for k in header] for m in order if m in old))


def _load_metrics(path: Path) -> dict[str, dict]:
    out = {}
    for r in _read_csv(path):
        arch = r.pop("model")
        out[arch] = {k: float(v) for k, v in r.items()}
    return out


def _figures(run: RunDir, base: str, metrics: dict, rocs, prs, confs) -> None:
    root = run.root / base
    for arch in metrics:
        label = DISPLAY_NAMES[arch]
        if label not in rocs:
            rocs[label] = _read_curve(root / f"roc_{arch}.csv", "ROC")
            prs[label] = _read_curve(root / f"pr_{arch}.csv", "PR")
            m = metrics[arch]
            confs[label] = Confusion(*(int(m[f"{k}_opt"]) for k in ("tp", "fp", "tn", "fn")))
    order = [DISPLAY_NAMES[a] for a in metrics]
    period = base.split("/", 1)[1].replace("_", " to ")
    plotting.curves_figure({k: rocs[k] for k in order}, run.path(f"{base}/roc.svg"), f"ROC, {period}")
    plotting.curves_figure({k: prs[k] for k in order}, run.path(f"{base}/pr.svg"),
                           f"Precision-recall, {period}")
    plotting.confusion_figure({k: confs[k] for k in order}, run.path(f"{base}/confusion.svg"),
                              f"Confusion at F1-optimal threshold, {period}")


def _loss_figure(run: RunDir) -> None:
    losses = {}
    for arch in run.cfg.models:
        p = run.root / f"models/{arch}_trainlog.csv"
        if p.exists():
            losses[DISPLAY_NAMES[arch]] = [float(r["loss"]) for r in _read_csv(p)]
    if losses:
        plotting.loss_figure(losses, run.path("eval/training_loss.svg"))


def run_compare(run: RunDir) -> list[PeriodSummary]:
    cfg = run.cfg
    summaries = []
    with run.step("compare"):
        for period in _period_names(cfg):
            base = f"eval/{period}"
            metrics = _load_metrics(run.existing(f"{base}/metrics.csv", "evaluate"))
            archs = [a for a in cfg.models if a in metrics]
            missing = [a for a in cfg.models if a not in metrics]
            if missing:
                raise UsageError(f"no evaluation for {missing} in {run.root / base}; run `evaluate` first")
            preds, labels = {}, None
            for arch in archs:
                rows = _read_csv(run.existing(f"{base}/scores_{arch}.csv", "evaluate"))
                s = np.array([float(r["score"]) for r in rows])
                y = np.array([int(r["label"]) for r in rows])
                if labels is not None and not np.array_equal(labels, y):
                    raise UsageError(f"score files in {run.root / base} are not aligned; re-run `evaluate`")
                labels = y
                preds[arch] = (s >= metrics[arch]["optimal_threshold"]).astype(int)
            pairs = pairwise_compare(preds, labels) if len(archs) >= 2 else {}
            if pairs:
                cbase = f"compare/{period}"
                _write_csv(run.path(f"{cbase}/mcnemar.csv"),
                           ["model_a", "model_b", "a", "b", "c", "d", "n", "chi2", "p_value",
                            "cohens_w", "effect", "significance", "degenerate"],
                           ([r.model_a, r.model_b, r.table.a, r.table.b, r.table.c, r.table.d, r.n,
                             r.chi2, r.p_value, r.cohens_w, r.effect, r.significance, int(r.degenerate)]
                            for r in pairs.values()))
                plotting.mcnemar_figure([DISPLAY_NAMES[a] for a in archs],
                                        {(DISPLAY_NAMES[a], DISPLAY_NAMES[b]): dataclasses.replace(
                                            r, model_a=DISPLAY_NAMES[a], model_b=DISPLAY_NAMES[b])
                                         for (a, b), r in pairs.items()},
                                        run.path(f"{cbase}/mcnemar.svg"),
                                        f"McNemar p-values, {period.replace('_', ' to ')}")
            summaries.append(PeriodSummary(period, len(labels), int(labels.sum()),
                                           {a: metrics[a] for a in archs}, pairs))
        _atomic_text(run.path("report.md"), render(summaries, cfg.digest(), cfg.seed))
    return summaries


def run_bench(run: RunDir) -> list[PeriodSummary]:
    if run.cfg.synthetic is not None:
        run_synth(run)
    run_prepare(run)
    run_train(run)
    run_evaluate(run)
    return run_compare(run)

