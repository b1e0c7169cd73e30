"""Command-line entry point.

Batch subcommands over a config file: ``pretrain``, ``cluster``, ``eval``,
``heatmap``, ``synth``, ``all``.  Exit codes: 0 success, 1 validation
failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import PRESETS, load_config, override_seed
from .persist import load_metrics_report, save_labels, save_matrix
from .pipeline import (
    export_heatmap,
    resolve_dataset,
    run_all,
    run_cluster,
    run_eval,
    run_pretrain,
)

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, metavar="PATH",
                        help="key = value config file")
    parser.add_argument("--preset", default=None, choices=sorted(PRESETS),
                        help="named preset applied before the config file")
    parser.add_argument("--seed", type=int, default=None, metavar="N",
                        help="override the master seed")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="override the output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entclust",
        description="Two-stage subspace clustering: contrastive pre-training, "
        "entropy-regularized self-expression, spectral clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("pretrain", help="train encoder and projection head"))

    cluster = sub.add_parser("cluster", help="learn coefficients and cluster")
    _add_common(cluster)
    cluster.add_argument("--identity-encoder", action="store_true",
                         help="use raw samples as embeddings (skip the encoder)")

    _add_common(sub.add_parser("eval", help="score labels.csv against ground truth"))

    heatmap = sub.add_parser("heatmap", help="render an affinity CSV as a PGM image")
    heatmap.add_argument("input", help="square affinity CSV")
    heatmap.add_argument("output", help="output PGM path")

    _add_common(sub.add_parser("synth", help="write the configured dataset as CSV"))

    run = sub.add_parser("all", help="pretrain, cluster, and evaluate in sequence")
    _add_common(run)
    run.add_argument("--identity-encoder", action="store_true",
                     help="use raw samples as embeddings (skip pre-training)")
    return parser


def _experiment_config(args):
    cfg = load_config(args.config, args.preset)
    if args.seed is not None:
        cfg = override_seed(cfg, args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _dispatch(args) -> None:
    if args.command == "heatmap":
        export_heatmap(args.input, args.output)
        print(f"wrote {args.output}")
        return
    cfg = _experiment_config(args)
    if args.command == "pretrain":
        files = run_pretrain(cfg)
        print(f"pretrain done: {len(files)} artifacts in {cfg.output_dir}")
    elif args.command == "cluster":
        files = run_cluster(cfg, args.identity_encoder)
        print(f"cluster done: {len(files)} artifacts in {cfg.output_dir}")
    elif args.command == "eval":
        report = run_eval(cfg)
        print(
            f"acc={report.acc:.4f} nmi={report.nmi:.4f} "
            f"n={report.n} k_true={report.k_true} k_pred={report.k_pred}"
        )
    elif args.command == "synth":
        data = resolve_dataset(cfg)
        os.makedirs(cfg.output_dir, exist_ok=True)
        save_matrix(os.path.join(cfg.output_dir, "samples.csv"), data.dataset.samples)
        written = "samples.csv"
        if data.dataset.labels is not None:
            save_labels(os.path.join(cfg.output_dir, "labels_true.csv"), data.dataset.labels)
            written += ", labels_true.csv"
        print(f"wrote {written} in {cfg.output_dir}")
    elif args.command == "all":
        files = run_all(cfg, args.identity_encoder)
        scores = load_metrics_report(os.path.join(cfg.output_dir, "metrics.txt"))
        print(f"run complete: {len(files)} artifacts in {cfg.output_dir}")
        print(
            f"acc={scores['acc']:.4f} nmi={scores['nmi']:.4f} "
            f"n={scores['n']} k_true={scores['k_true']} k_pred={scores['k_pred']}"
        )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
