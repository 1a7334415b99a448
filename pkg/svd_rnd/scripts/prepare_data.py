#!/usr/bin/env python3
"""
Create datasets: synthetic corpora and degraded copies of existing containers.

Usage:
    svd-rnd synth --kind smooth_textures --n 2000 --seed 0 --out data/train.rndt
    svd-rnd blur --method svd --param 28 --in data/train.rndt --out data/blur28.rndt

Examples:
    svd-rnd blur --method gauss --param 3x5 --in X --out Y
    svd-rnd blur --method geom --param translate_v:8 --in X --out Y
    svd-rnd blur --method orthogonal --param 20:7 --in X --out Y
    svd-rnd blur --method geom --param rotate --in train.yaml --out Y --labels-out Y_labels.rndt
"""

import argparse
import logging

import numpy as np
import yaml

from svd_rnd.errors import InputValidationError
from svd_rnd.models import SyntheticKind
from svd_rnd.scripts.common import (
    load_images,
    output_path,
    parse_shape,
    stamp_arguments,
    write_stamp,
)
from svd_rnd.services import data_io
from svd_rnd.services.degradations import METHODS, apply_degradation, parse_degradation
from svd_rnd.services.synthetic import synth_generate

logger = logging.getLogger(__name__)


def run_synth(args) -> int:
    """Generate a synthetic corpus and write it as a float32 container."""
    dataset = synth_generate(args.kind, args.n, parse_shape(args.shape), args.seed)
    out = data_io.save_dataset(dataset, output_path(args.out))

    manifest = dataset.manifest.model_copy(update={"name": out.stem})
    manifest_path = out.with_suffix(".yaml")
    manifest_path.write_text(
        yaml.safe_dump(manifest.model_dump(mode="json"), sort_keys=False), encoding="utf-8"
    )
    write_stamp(out, "synth", stamp_arguments(args), seeds=[args.seed])
    logger.info(f"✅ Wrote {len(dataset)} images to {out} (manifest {manifest_path.name})")
    return 0


def run_blur(args) -> int:
    """Apply one degradation to every image of a container."""
    spec = parse_degradation(args.method, args.param)
    dataset = load_images(args.input)
    labels_out = output_path(args.labels_out) if args.labels_out else None
    if labels_out is not None and dataset.labels is None:
        raise InputValidationError("--labels-out needs a manifest with labels_source")
    degraded = apply_degradation(dataset.images, spec)
    labels = None
    if dataset.labels is not None:
        # Geometric variants are image-major
        labels = np.repeat(dataset.labels, spec.variant_count)
    blurred = data_io.ImageDataset(images=degraded, manifest=dataset.manifest, labels=labels)
    out = data_io.save_dataset(blurred, output_path(args.out), labels_out)
    write_stamp(out, "blur", stamp_arguments(args), seeds=[spec.seed])
    logger.info(f"✅ {spec.label()}: wrote {len(degraded)} images to {out}")
    return 0


def add_parsers(subparsers) -> None:
    synth = subparsers.add_parser("synth", help="Generate a synthetic image corpus")
    synth.add_argument("--kind", required=True, choices=[k.value for k in SyntheticKind])
    synth.add_argument("--n", type=int, required=True, help="Number of images")
    synth.add_argument("--seed", type=int, default=0, help="PRNG seed (default: 0)")
    synth.add_argument("--shape", default="3,32,32", help="C,H,W (default: 3,32,32)")
    synth.add_argument("--out", required=True, help="Output container path")
    synth.set_defaults(func=run_synth)

    blur = subparsers.add_parser("blur", help="Apply one degradation to a container")
    blur.add_argument("--method", required=True, choices=METHODS)
    blur.add_argument(
        "--param",
        required=True,
        help="svd: K; dct: kept coefficients; gauss: KXxKY; geom: kind[:magnitude]; "
        "orthogonal: alpha[:seed]",
    )
    blur.add_argument("--in", dest="input", required=True, help="Input container or manifest")
    blur.add_argument("--out", required=True, help="Output container path")
    blur.add_argument(
        "--labels-out", help="Write the source labels, repeated per variant, to this container"
    )
    blur.set_defaults(func=run_blur)


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Create synthetic or degraded datasets")
    add_parsers(parser.add_subparsers(dest="command", required=True))
    args = parser.parse_args()
    return args.func(args)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    raise SystemExit(main())
