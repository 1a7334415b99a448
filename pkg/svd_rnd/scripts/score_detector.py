#!/usr/bin/env python3
"""
Score data with a trained detector and evaluate the scores.

Usage:
    svd-rnd score --model runs/model.ckpt --data data/test.rndt --out runs/in.csv
    svd-rnd eval --in-scores runs/in.csv --ood-scores runs/noise.csv --table-row
    svd-rnd probe --model runs/model.ckpt --data data/train.rndt --labels data/labels.rndt
    svd-rnd orthogonal-probe --model runs/model.ckpt --data data/test.rndt --alphas 5,10,15,20

Examples:
    svd-rnd score --model M --data X --scorer typicality --out scores.csv
    svd-rnd eval --in-scores A --ood-scores B C --label SVD-RND --out report.md
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from svd_rnd.errors import InputValidationError
from svd_rnd.models import (
    DegradationKind,
    EvalSummary,
    LinearProbeReport,
    Scorer,
)
from svd_rnd.models.degradation_models import ORTHOGONAL_ALPHAS
from svd_rnd.scripts.common import (
    load_images,
    output_path,
    parse_float_list,
    stamp_arguments,
    write_report,
    write_stamp,
)
from svd_rnd.services import data_io
from svd_rnd.services.detection import orthogonal_probe, read_scores, score, write_scores
from svd_rnd.services.evaluation import (
    collect_features,
    evaluate,
    format_table_row,
    linear_probe,
)
from svd_rnd.services.rnd_trainer import load_checkpoint

logger = logging.getLogger(__name__)


def run_score(args) -> int:
    """Write one score per sample."""
    model = load_checkpoint(args.model)
    dataset = load_images(args.data)
    scores = score(model, dataset.images, Scorer(args.scorer))
    out = output_path(args.out)
    write_scores(scores, out, Scorer(args.scorer))
    write_stamp(out, "score", stamp_arguments(args), config_hash=model.config_fingerprint)
    logger.info(f"✅ Scored {len(scores)} samples ({args.scorer}) to {out}")
    return 0


def run_eval(args) -> int:
    """Five detection metrics for the in-distribution scores against each OOD score file."""
    in_scores = read_scores(args.in_scores)
    names = args.names.split(",") if args.names else [Path(p).stem for p in args.ood_scores]
    if len(names) != len(args.ood_scores):
        raise InputValidationError(f"{len(names)} names for {len(args.ood_scores)} OOD files")
    reports = [
        evaluate(in_scores, read_scores(path), ood_name=name)
        for path, name in zip(args.ood_scores, names)
    ]
    summary = EvalSummary(label=args.label, reports=reports)
    if args.table_row:
        summary.table_row = format_table_row(args.label, reports)
        sys.stdout.write(summary.table_row + "\n")
    out = write_report("eval", summary, args.out)
    write_stamp(out, "eval", stamp_arguments(args))
    return 0


def run_probe(args) -> int:
    """Linear probe accuracy on frozen predictor features."""
    model = load_checkpoint(args.model)
    dataset = load_images(args.data)
    labels = data_io.read_container(args.labels).ravel()
    if len(labels) < len(dataset):
        raise InputValidationError(f"{len(labels)} labels for {len(dataset)} images")
    labels = labels[: len(dataset)]

    depth = args.depth if args.depth is not None else len(model.predictor.module) - 1
    features = collect_features(model.predictor, dataset.images, depth)
    accuracy = linear_probe(
        features, labels, train_fraction=args.train_fraction, seed=args.seed, schedule=args.schedule
    )
    report = LinearProbeReport(
        accuracy=accuracy,
        depth=depth,
        schedule=args.schedule,
        feature_dim=features.shape[1],
        classes=len(np.unique(labels)),
        train_fraction=args.train_fraction,
    )
    out = write_report("linear_probe", report, args.out)
    write_stamp(out, "probe", stamp_arguments(args), seeds=[args.seed])
    return 0


def _default_blur_k(model) -> int:
    for spec in model.config.degradations:
        if spec.kind == DegradationKind.SVD_BLUR:
            return spec.k
    raise InputValidationError("model was not trained with an SVD blur; pass --blur-k")


def run_orthogonal_probe(args) -> int:
    """Mean uncertainty on original, blurred and perturbed data."""
    model = load_checkpoint(args.model)
    dataset = load_images(args.data)
    seeds = list(range(args.seeds))
    blur_k = args.blur_k if args.blur_k is not None else _default_blur_k(model)
    table = orthogonal_probe(model, dataset.images, parse_float_list(args.alphas), seeds, blur_k)
    out = write_report("orthogonal_probe", table, args.out)
    write_stamp(
        out,
        "orthogonal-probe",
        stamp_arguments(args),
        config_hash=model.config_fingerprint,
        seeds=seeds,
    )
    return 0


def add_parsers(subparsers) -> None:
    score_parser = subparsers.add_parser("score", help="Score samples with a trained model")
    score_parser.add_argument("--model", required=True, help="Checkpoint path")
    score_parser.add_argument("--data", required=True, help="Container or manifest")
    score_parser.add_argument(
        "--scorer", choices=[s.value for s in Scorer], default=Scorer.RND.value
    )
    score_parser.add_argument("--out", required=True, help="Score CSV path")
    score_parser.set_defaults(func=run_score)

    eval_parser = subparsers.add_parser("eval", help="Detection metrics from score files")
    eval_parser.add_argument("--in-scores", required=True, help="In-distribution score CSV")
    eval_parser.add_argument("--ood-scores", required=True, nargs="+", help="OOD score CSV(s)")
    eval_parser.add_argument("--names", help="Comma-separated OOD names (default: file stems)")
    eval_parser.add_argument("--label", default="RND", help="Method label for the table row")
    eval_parser.add_argument("--table-row", action="store_true", help="Print the table row")
    eval_parser.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    eval_parser.set_defaults(func=run_eval)

    probe_parser = subparsers.add_parser("probe", help="Linear probe on predictor features")
    probe_parser.add_argument("--model", required=True, help="Checkpoint path")
    probe_parser.add_argument("--data", required=True, help="Container or manifest")
    probe_parser.add_argument("--labels", required=True, help="Label container")
    probe_parser.add_argument(
        "--depth", type=int, help="Predictor layers to keep (default: all but the last)"
    )
    probe_parser.add_argument("--schedule", choices=["adam", "sgd"], default="adam")
    probe_parser.add_argument("--train-fraction", type=float, default=0.8)
    probe_parser.add_argument("--seed", type=int, default=0)
    probe_parser.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    probe_parser.set_defaults(func=run_probe)

    ortho_parser = subparsers.add_parser(
        "orthogonal-probe", help="Uncertainty under orthogonal perturbations"
    )
    ortho_parser.add_argument("--model", required=True, help="Checkpoint path")
    ortho_parser.add_argument("--data", required=True, help="Container or manifest")
    ortho_parser.add_argument(
        "--alphas",
        default=",".join(f"{a:g}" for a in ORTHOGONAL_ALPHAS),
        help="Comma-separated perturbation sizes in percent (default: 5,10,15,20)",
    )
    ortho_parser.add_argument("--seeds", type=int, default=20, help="Number of seeds (default: 20)")
    ortho_parser.add_argument("--blur-k", type=int, help="K for the blurred row (default: model's)")
    ortho_parser.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    ortho_parser.set_defaults(func=run_orthogonal_probe)


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Score, evaluate and probe trained detectors")
    add_parsers(parser.add_subparsers(dest="command", required=True))
    args = parser.parse_args()
    return args.func(args)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    raise SystemExit(main())
