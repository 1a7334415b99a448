"""Helpers shared by the command implementations."""

import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy
import sklearn
import torch
import yaml
from pydantic import BaseModel

from svd_rnd import __version__, config
from svd_rnd.errors import InputValidationError
from svd_rnd.models import DatasetManifest
from svd_rnd.services import data_io
from svd_rnd.services.report_renderer import ReportRenderer

logger = logging.getLogger(__name__)


def parse_int_list(text: str) -> list[int]:
    """``"18,20,22"`` -> [18, 20, 22]."""
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InputValidationError(f"expected comma-separated integers, got {text!r}") from e


def parse_float_list(text: str) -> list[float]:
    """``"5,10,15"`` -> [5.0, 10.0, 15.0]."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InputValidationError(f"expected comma-separated numbers, got {text!r}") from e


def parse_shape(text: str) -> tuple[int, int, int]:
    """``"3,32,32"`` -> (3, 32, 32)."""
    shape = parse_int_list(text)
    if len(shape) != 3:
        raise InputValidationError(f"shape must be C,H,W, got {text!r}")
    return tuple(shape)


def load_images(path: str | Path) -> data_io.ImageDataset:
    """Load a dataset from a manifest (.yaml/.yml) or a bare RNDT container."""
    path = Path(path)
    if path.suffix.lower() in (".yaml", ".yml"):
        return data_io.load_dataset(data_io.load_manifest(path))
    images = data_io.images_to_float(data_io.read_container(path))
    if images.ndim != 4:
        raise InputValidationError(f"{path}: expected (N, C, H, W) images, got {images.shape}")
    manifest = DatasetManifest(
        name=path.stem, source=str(path), count=len(images), shape=images.shape[1:]
    )
    return data_io.ImageDataset(images=images, manifest=manifest)


def output_path(path: str | Path) -> Path:
    """Resolve an output path under SVD_RND_OUTPUT_DIR and create its parent."""
    resolved = config.resolve_output_path(path)
    resolved.parent.mkdir(parents=True, exist_ok=True)
    return resolved


def write_report(kind: str, report: BaseModel, out: str | None) -> Path | None:
    """Write a report to ``out`` (YAML or Markdown), or YAML to stdout when ``out`` is None."""
    if out is None:
        sys.stdout.write(yaml.safe_dump(report.model_dump(mode="json"), sort_keys=False))
        return None
    return ReportRenderer().write(kind, report, output_path(out))


def versions() -> dict[str, str]:
    return {
        "svd_rnd": str(__version__),
        "numpy": str(np.__version__),
        "scipy": str(scipy.__version__),
        # TorchVersion is a str subclass that safe_dump rejects
        "torch": str(torch.__version__),
        "scikit-learn": str(sklearn.__version__),
    }


def write_stamp(
    output: Path | None,
    command: str,
    arguments: dict,
    config_hash: str | None = None,
    seeds: list[int] | None = None,
) -> Path | None:
    """Write ``<output>.stamp.yaml`` recording the command, arguments, seeds and versions."""
    if output is None:
        return None
    arguments = {
        k: str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v
        for k, v in arguments.items()
    }
    if config_hash is None:
        config_hash = hashlib.sha256(
            json.dumps(arguments, sort_keys=True, default=str).encode()
        ).hexdigest()
    stamp = {
        "command": command,
        "arguments": arguments,
        "config_hash": config_hash,
        "seeds": list(seeds or []),
        "versions": versions(),
    }
    path = output.with_name(output.name + ".stamp.yaml")
    path.write_text(yaml.safe_dump(stamp, sort_keys=True), encoding="utf-8")
    logger.debug(f"Wrote stamp {path}")
    return path


def stamp_arguments(args) -> dict:
    """Command arguments as plain values, without the dispatch function."""
    return {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "verbose")
    }
