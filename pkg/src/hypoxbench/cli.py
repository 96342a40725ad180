"""Command line entry point: ``hypoxbench <subcommand> [options]``.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numeric
error.  The output directory is taken from ``--output``, then the
``HYPOXBENCH_OUTPUT_DIR`` environment variable, then the config file.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import __version__, config, pipeline
from .errors import HypoxiaError
from .models import ARCHITECTURES, DISPLAY_NAMES

log = logging.getLogger("hypoxbench")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: usage error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="run config (YAML); default: the bundled benchmark")
    common.add_argument("-o", "--output", help="run directory (overrides env and config)")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="hypoxbench", description="Benchmark sequence classifiers for daily hypoxia.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write the synthetic hindcast CSV")
    sub.add_parser("prepare", parents=[common], help="split, scale and window; write datasets")
    model_choices = ["all", *ARCHITECTURES]
    for name, hlp in (("train", "train one or all architectures"),
                      ("evaluate", "score test periods; write metrics, curves and figures")):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("-m", "--model", choices=model_choices, default="all")
    sub.add_parser("compare", parents=[common], help="pairwise McNemar tests and the report")
    sub.add_parser("bench", parents=[common], help="synth, prepare, train, evaluate and compare")
    return p


def _run_dir(args) -> pipeline.RunDir:
    path = args.config or config.bundled_config_path()
    cfg = config.load(path)
    if args.seed is not None:
        if args.seed < 0:
            raise config.ConfigError("--seed must be non-negative")
        cfg = cfg.with_seed(args.seed)
    out = config.resolve_output(cfg, args.output)
    return pipeline.RunDir(out, cfg.with_output(out))


def _summary(summaries) -> None:
    for s in summaries:
        print(f"period {s.name}: {s.n} sequences, {s.positives} hypoxic")
        print("model,auc_roc,auc_pr,accuracy,f1,brier,log_loss")
        for arch, m in s.metrics.items():
            print(",".join([DISPLAY_NAMES[arch]] + [f"{m[k]:.4f}" for k in
                                                    ("auc_roc", "auc_pr", "accuracy", "f1", "brier", "log_loss")]))
        if s.pairwise:
            print("model_a,model_b,chi2,p_value,cohens_w")
            for r in s.pairwise.values():
                names = f"{DISPLAY_NAMES[r.model_a]},{DISPLAY_NAMES[r.model_b]}"
                print(f"{names},{r.chi2:.4f},{r.p_value:.4g},{r.cohens_w:.4f}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = _run_dir(args)
        cmd = args.command
        if cmd == "synth":
            print(pipeline.run_synth(run))
        elif cmd == "prepare":
            prep = pipeline.run_prepare(run)
            print(f"train: {len(prep.train)} sequences, {int(prep.train.y.sum())} hypoxic")
            for name, ds in prep.tests.items():
                print(f"test {name}: {len(ds)} sequences, {int(ds.y.sum())} hypoxic")
        elif cmd == "train":
            for arch, tlog in pipeline.run_train(run, args.model).items():
                print(f"{arch}: {len(tlog.epochs)} epochs, final loss {tlog.losses[-1]:.5f}")
        elif cmd == "evaluate":
            for (period, arch), ev in pipeline.run_evaluate(run, args.model).items():
                print(f"{period} {arch}: AUC-ROC {ev.report.auc_roc:.4f}, AUC-PR {ev.report.auc_pr:.4f}")
        elif cmd == "compare":
            _summary(pipeline.run_compare(run))
        elif cmd == "bench":
            _summary(pipeline.run_bench(run))
        print(f"outputs in {run.root}")
        return 0
    except HypoxiaError as exc:
        print(f"hypoxbench {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
