#!/usr/bin/env python3
"""
Train SVD-RND detectors and pick blur strength on validation OOD data.

Usage:
    svd-rnd train --config configs/synthetic_b1.yaml --out runs/model.ckpt
    svd-rnd sweep-k --config configs/synthetic_b1.yaml --grid 18,20,22,24,25,26,27,28

Examples:
    svd-rnd train --config C --out model.ckpt --train-fraction 0.5
    svd-rnd sweep-k --config C --method dct --grid 4,8,12,16
    svd-rnd sweep-k --config C --grid 8+22,10+24 --seeds 0,1,2
"""

import argparse
import logging
import time
from pathlib import Path

from svd_rnd.models import SelectionMetric, TrainConfig
from svd_rnd.models.degradation_models import SVD_K_GRID_SINGLE
from svd_rnd.scripts.common import (
    output_path,
    parse_int_list,
    stamp_arguments,
    write_report,
    write_stamp,
)
from svd_rnd.services import data_io
from svd_rnd.services.degradations import METHODS
from svd_rnd.services.format_utils import format_duration
from svd_rnd.services.rnd_trainer import save_checkpoint, train, write_step_log
from svd_rnd.services.selection import sweep

logger = logging.getLogger(__name__)


def run_train(args) -> int:
    """Train one model from an experiment config and save the checkpoint."""
    experiment = data_io.load_experiment_config(args.config)
    overrides = {}
    if args.train_fraction is not None:
        overrides["train_fraction"] = args.train_fraction
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    train_config = TrainConfig.model_validate(
        {**experiment.training.model_dump(), **overrides}
    )

    dataset = data_io.load_dataset(experiment.train)
    started = time.monotonic()
    model = train(dataset.images, train_config)
    logger.info(f"Training took {format_duration(time.monotonic() - started)}")

    name = f"{experiment.train.name}-seed{train_config.seed}.ckpt"
    out = output_path(args.out or Path(experiment.output_dir) / name)
    save_checkpoint(model, out)
    write_step_log(model.step_log, out.with_name(out.name + ".steps.csv"))
    write_stamp(
        out,
        "train",
        stamp_arguments(args),
        config_hash=train_config.fingerprint(),
        seeds=[train_config.seed],
    )
    logger.info(f"✅ Saved model (b_train={model.b_train}) to {out}")
    return 0


def _validation_sets(experiment) -> dict:
    if experiment.val_ood:
        manifests = experiment.val_ood
        return {m.name: data_io.load_dataset(m).images for m in manifests}
    return {
        m.name: data_io.validation_slice(data_io.load_dataset(m)).images
        for m in experiment.test_ood
    }


def run_sweep(args) -> int:
    """Train one model per grid value and seed; report the best value."""
    experiment = data_io.load_experiment_config(args.config)
    seeds = parse_int_list(args.seeds) if args.seeds else experiment.seeds
    metric = SelectionMetric(args.metric) if args.metric else experiment.selection_metric
    grid = [g.strip() for g in args.grid.split(",") if g.strip()]

    train_images = data_io.load_dataset(experiment.train).images
    val_in = data_io.validation_slice(data_io.load_dataset(experiment.test_in)).images
    report = sweep(
        train_images,
        experiment.training,
        args.method,
        grid,
        val_in,
        _validation_sets(experiment),
        seeds,
        metric,
    )
    out = write_report("sweep", report, args.out)
    write_stamp(
        out, "sweep-k", stamp_arguments(args), config_hash=experiment.fingerprint(), seeds=seeds
    )
    return 0


def add_parsers(subparsers) -> None:
    train_parser = subparsers.add_parser("train", help="Train a detector from a config")
    train_parser.add_argument("--config", required=True, help="Experiment YAML")
    train_parser.add_argument(
        "--out", help="Checkpoint path (default: <output_dir>/<train name>-seed<seed>.ckpt)"
    )
    train_parser.add_argument(
        "--train-fraction", type=float, help="Train on this fraction of the training set"
    )
    train_parser.add_argument("--seed", type=int, help="Override the training seed")
    train_parser.add_argument("--epochs", type=int, help="Override the epoch count")
    train_parser.set_defaults(func=run_train)

    sweep_parser = subparsers.add_parser("sweep-k", help="Validation-based parameter sweep")
    sweep_parser.add_argument("--config", required=True, help="Experiment YAML")
    sweep_parser.add_argument(
        "--method", choices=[m for m in METHODS if m != "orthogonal"], default="svd"
    )
    sweep_parser.add_argument(
        "--grid",
        default=",".join(str(k) for k in SVD_K_GRID_SINGLE),
        help="Comma-separated parameters; join with + for several auxiliary sets",
    )
    sweep_parser.add_argument("--seeds", help="Comma-separated seeds (default: from config)")
    sweep_parser.add_argument(
        "--metric", choices=[m.value for m in SelectionMetric], help="Selection metric"
    )
    sweep_parser.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    sweep_parser.set_defaults(func=run_sweep)


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Train detectors and sweep blur parameters")
    add_parsers(parser.add_subparsers(dest="command", required=True))
    args = parser.parse_args()
    return args.func(args)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    raise SystemExit(main())
