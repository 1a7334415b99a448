#!/usr/bin/env python3
"""
Spectral statistics of a dataset and validation-free choice of SVD blur strength.

Usage:
    svd-rnd effective-rank --in data/train.rndt
    svd-rnd select-k --in data/train.rndt --b 2 --out runs/select_k.yaml
"""

import argparse
import logging

from svd_rnd.models import ChannelAggregation
from svd_rnd.scripts.common import (
    load_images,
    parse_int_list,
    stamp_arguments,
    write_report,
    write_stamp,
)
from svd_rnd.services.effective_rank import dataset_rank_report, select_k

logger = logging.getLogger(__name__)


def run_effective_rank(args) -> int:
    """Report the mean log effective rank of a dataset."""
    dataset = load_images(args.input)
    report = dataset_rank_report(
        dataset.images, dataset.manifest.name, ChannelAggregation(args.aggregation)
    )
    out = write_report("dataset_rank", report, args.out)
    write_stamp(out, "effective-rank", stamp_arguments(args))
    logger.info(f"{report.name}: LER {report.dataset_ler:.4f} bits over {report.count} images")
    return 0


def run_select_k(args) -> int:
    """Choose discarded singular values for b auxiliary datasets."""
    dataset = load_images(args.input)
    candidates = parse_int_list(args.candidates) if args.candidates else None
    selection = select_k(
        dataset.images, args.b, ChannelAggregation(args.aggregation), candidates=candidates
    )
    out = write_report("k_selection", selection, args.out)
    write_stamp(out, "select-k", stamp_arguments(args))
    logger.info(f"✅ Selected K = {selection.chosen_k}")
    return 0


def add_parsers(subparsers) -> None:
    aggregation_help = "How channel spectra combine (default: effective_rank)"

    rank = subparsers.add_parser("effective-rank", help="Dataset log effective rank")
    rank.add_argument("--in", dest="input", required=True, help="Container or manifest")
    rank.add_argument(
        "--aggregation",
        choices=[a.value for a in ChannelAggregation],
        default=ChannelAggregation.EFFECTIVE_RANK.value,
        help=aggregation_help,
    )
    rank.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    rank.set_defaults(func=run_effective_rank)

    select = subparsers.add_parser("select-k", help="Uniform effective-rank K selection")
    select.add_argument("--in", dest="input", required=True, help="Container or manifest")
    select.add_argument("--b", type=int, required=True, help="Number of auxiliary datasets")
    select.add_argument("--candidates", help="Comma-separated K values (default: 1..min(H,W)-1)")
    select.add_argument(
        "--aggregation",
        choices=[a.value for a in ChannelAggregation],
        default=ChannelAggregation.EFFECTIVE_RANK.value,
        help=aggregation_help,
    )
    select.add_argument("--out", help="Report path (.yaml or .md); stdout when omitted")
    select.set_defaults(func=run_select_k)


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Effective-rank statistics and K selection")
    add_parsers(parser.add_subparsers(dest="command", required=True))
    args = parser.parse_args()
    return args.func(args)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    raise SystemExit(main())
