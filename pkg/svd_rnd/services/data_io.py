"""Dataset ingestion: RNDT tensor containers, CIFAR binaries, manifests, splits and resizing.

RNDT container layout (all little-endian)::

    magic "RNDT" | version u16 | dtype u8 (0 = u8, 1 = f32) | ndim u8 | dims u32 x ndim | payload

A file may hold several containers back to back.
"""

import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml
from scipy import ndimage

from svd_rnd import config
from svd_rnd.errors import ContainerFormatError, InputValidationError
from svd_rnd.models import DatasetManifest, ExperimentConfig, SourceFormat

logger = logging.getLogger(__name__)

MAGIC = b"RNDT"
VERSION = 1
_HEADER = struct.Struct("<4sHBB")
_DTYPES = {0: np.dtype("u1"), 1: np.dtype("<f4")}

CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR_SHAPE = (3, 32, 32)


# =============================================================================
# Tensor containers
# =============================================================================


def encode_container(array: np.ndarray) -> bytes:
    """Serialize one array; uint8 arrays keep dtype 0, everything else becomes float32."""
    array = np.asarray(array)
    if array.ndim > 255:
        raise InputValidationError(f"container supports at most 255 dims, got {array.ndim}")
    code = 0 if array.dtype == np.uint8 else 1
    payload = np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes()
    dims = struct.pack(f"<{array.ndim}I", *array.shape)
    return _HEADER.pack(MAGIC, VERSION, code, array.ndim) + dims + payload


def decode_containers(data: bytes) -> list[np.ndarray]:
    """Parse every container in a byte string.

    Raises:
        ContainerFormatError: On bad magic, version or dtype, or truncation,
            with the byte offset where parsing failed.
    """
    arrays = []
    offset = 0
    while offset < len(data):
        if len(data) - offset < _HEADER.size:
            raise ContainerFormatError("truncated container header", offset=offset)
        magic, version, code, ndim = _HEADER.unpack_from(data, offset)
        if magic != MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r}", offset=offset)
        if version != VERSION:
            raise ContainerFormatError(
                f"unsupported container version {version}", offset=offset + 4
            )
        if code not in _DTYPES:
            raise ContainerFormatError(f"unknown dtype code {code}", offset=offset + 6)
        offset += _HEADER.size

        dims_size = 4 * ndim
        if len(data) - offset < dims_size:
            raise ContainerFormatError("truncated container dims", offset=offset)
        dims = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += dims_size

        dtype = _DTYPES[code]
        payload_size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        if len(data) - offset < payload_size:
            raise ContainerFormatError(
                f"truncated payload: need {payload_size} bytes, have {len(data) - offset}",
                offset=offset,
            )
        count = payload_size // dtype.itemsize
        array = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        arrays.append(array.reshape(dims).copy())
        offset += payload_size
    return arrays


def write_containers(path: str | Path, arrays: list[np.ndarray]) -> Path:
    """Write arrays as consecutive containers to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(encode_container(a) for a in arrays))
    return path


def read_containers(path: str | Path) -> list[np.ndarray]:
    """Read every container stored in ``path``."""
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"container file not found: {path}")
    arrays = decode_containers(path.read_bytes())
    if not arrays:
        raise ContainerFormatError(f"{path} holds no containers", offset=0)
    return arrays


def read_container(path: str | Path) -> np.ndarray:
    """Read the first container of ``path``."""
    return read_containers(path)[0]


# =============================================================================
# Datasets
# =============================================================================


@dataclass
class ImageDataset:
    """Images (N, C, H, W) as float32 in [0, 1] for u8 sources, optional labels."""

    images: np.ndarray
    manifest: DatasetManifest
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.images)

    def take(self, indices: np.ndarray) -> "ImageDataset":
        """Subset by index, keeping labels aligned."""
        labels = None if self.labels is None else self.labels[indices]
        manifest = self.manifest.model_copy(update={"count": len(indices)})
        return replace(self, images=self.images[indices], labels=labels, manifest=manifest)


def images_to_float(array: np.ndarray) -> np.ndarray:
    """Scale u8 payloads to [0, 1]; float payloads pass through as float32."""
    if array.dtype == np.uint8:
        return array.astype(np.float32) / np.float32(255.0)
    return array.astype(np.float32)


def read_cifar(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a CIFAR-10 binary batch: 1 label byte + 3072 channel-major bytes per record.

    Returns:
        (images as uint8 (N, 3, 32, 32), labels as uint8 (N,))
    """
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"CIFAR file not found: {path}")
    data = np.fromfile(path, dtype=np.uint8)
    remainder = data.size % CIFAR_RECORD_BYTES
    if remainder:
        raise ContainerFormatError(
            f"CIFAR file size {data.size} is not a multiple of {CIFAR_RECORD_BYTES}",
            offset=data.size - remainder,
        )
    records = data.reshape(-1, CIFAR_RECORD_BYTES)
    return records[:, 1:].reshape(-1, *CIFAR_SHAPE).copy(), records[:, 0].copy()


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load a YAML manifest; relative sources resolve against the manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    return manifest_from_mapping(data, path.parent)


def manifest_from_mapping(data: dict, base_dir: Path) -> DatasetManifest:
    """Validate a manifest mapping, resolving relative paths against ``base_dir``."""
    data = dict(data)
    for key in ("source", "labels_source"):
        if data.get(key) and not Path(data[key]).is_absolute():
            data[key] = str(Path(base_dir) / data[key])
    return DatasetManifest.model_validate(data)


def load_dataset(manifest: DatasetManifest) -> ImageDataset:
    """Materialize the dataset a manifest describes.

    Ordering is preserved and the first ``count`` items are taken.

    Raises:
        InputValidationError: If the source is missing, holds fewer than
            ``count`` items or does not match the declared shape.
        ContainerFormatError: On malformed containers.
    """
    if manifest.recipe is not None:
        from svd_rnd.services.synthetic import synth_generate

        recipe = manifest.recipe
        generated = synth_generate(recipe.kind, recipe.n, recipe.shape, recipe.seed)
        images, labels = generated.images, None
    elif manifest.format == SourceFormat.CIFAR:
        raw, labels = read_cifar(manifest.source)
        images = images_to_float(raw)
    else:
        images = images_to_float(read_container(manifest.source))
        labels = read_container(manifest.labels_source) if manifest.labels_source else None

    if images.ndim != 4:
        raise InputValidationError(
            f"{manifest.name}: expected (N, C, H, W) images, got shape {images.shape}"
        )
    if manifest.count > len(images):
        raise InputValidationError(
            f"{manifest.name}: manifest count {manifest.count} exceeds {len(images)} records"
        )
    images = images[: manifest.count]
    if labels is not None:
        if len(labels) < manifest.count:
            raise InputValidationError(
                f"{manifest.name}: {len(labels)} labels for {manifest.count} images"
            )
        labels = np.asarray(labels[: manifest.count]).astype(np.int64)
    if manifest.resize_to is not None:
        images = resize_bilinear(images, manifest.resize_to, manifest.resize_to).astype(np.float32)
    if tuple(images.shape[1:]) != tuple(manifest.shape):
        raise InputValidationError(
            f"{manifest.name}: images have shape {images.shape[1:]}, manifest says {manifest.shape}"
        )
    logger.info(f"Loaded {manifest.name}: {len(images)} images of shape {images.shape[1:]}")
    return ImageDataset(images=images, manifest=manifest, labels=labels)


def save_dataset(
    dataset: ImageDataset, path: str | Path, labels_path: str | Path | None = None
) -> Path:
    """Write images (float32) and optional labels (u8) as containers."""
    path = write_containers(path, [np.asarray(dataset.images, dtype=np.float32)])
    if labels_path is not None and dataset.labels is not None:
        write_containers(labels_path, [np.asarray(dataset.labels, dtype=np.uint8)])
    return path


def validation_slice(dataset: ImageDataset, limit: int | None = None) -> ImageDataset:
    """The first ``limit`` items (default VALIDATION_LIMIT), or all if fewer."""
    limit = config.VALIDATION_LIMIT if limit is None else limit
    return dataset.take(np.arange(min(limit, len(dataset))))


# =============================================================================
# Resizing and splits
# =============================================================================


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Corner-aligned bilinear resize of (C, H, W) or (N, C, H, W) to ``height`` x ``width``."""
    image = np.asarray(image, dtype=np.float64)
    in_height, in_width = image.shape[-2:]
    if min(in_height, in_width, height, width) < 1:
        raise InputValidationError(f"cannot resize {image.shape[-2:]} to {(height, width)}")
    if (in_height, in_width) == (height, width):
        return image.copy()
    factors = (1.0,) * (image.ndim - 2) + (height / in_height, width / in_width)
    return ndimage.zoom(image, factors, order=1, mode="nearest", grid_mode=False)


def split_indices(n: int, fractions: list[float], seed: int) -> list[np.ndarray]:
    """Index sets for a seeded permutation cut into consecutive prefix slices.

    Each part keeps the original relative order of its items, so a single
    fraction of 1.0 is the identity and smaller fractions nest.

    Raises:
        InputValidationError: If fractions are out of range, sum above 1 or
            produce an empty part.
    """
    if not fractions or any(f <= 0 or f > 1 for f in fractions):
        raise InputValidationError(f"fractions must lie in (0, 1], got {fractions}")
    if sum(fractions) > 1 + 1e-9:
        raise InputValidationError(f"fractions sum to {sum(fractions)} > 1")
    permutation = np.random.default_rng(seed).permutation(n)
    parts = []
    start = 0
    for fraction in fractions:
        count = int(np.floor(fraction * n + 1e-9))
        if count < 1:
            raise InputValidationError(f"fraction {fraction} of {n} items is an empty split")
        parts.append(np.sort(permutation[start : start + count]))
        start += count
    return parts


def split(data, fractions: list[float], seed: int) -> list:
    """Split an ImageDataset or an array along its first axis."""
    n = len(data)
    parts = split_indices(n, fractions, seed)
    if isinstance(data, ImageDataset):
        return [data.take(p) for p in parts]
    return [np.asarray(data)[p] for p in parts]


def subsample(data, fraction: float, seed: int, min_count: int = 1):
    """First ``fraction`` of the seeded permutation; rejects subsets below ``min_count``."""
    if fraction == 1.0:
        return data
    (part,) = split(data, [fraction], seed)
    if len(part) < min_count:
        raise InputValidationError(
            f"fraction {fraction} leaves {len(part)} items, fewer than one batch of {min_count}"
        )
    return part


# =============================================================================
# Experiment configs
# =============================================================================


def _resolve_manifest(entry, base_dir: Path) -> DatasetManifest:
    if isinstance(entry, str):
        return load_manifest(base_dir / entry)
    if isinstance(entry, dict):
        return manifest_from_mapping(entry, base_dir)
    raise InputValidationError(
        f"manifest entry must be a path or mapping, got {type(entry).__name__}"
    )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Load an experiment YAML file.

    Dataset entries may be inline manifest mappings or paths to manifest
    files; relative paths resolve against the config's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"experiment config not found: {path}")
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    base_dir = path.parent
    for key in ("train", "test_in"):
        if key in data:
            data[key] = _resolve_manifest(data[key], base_dir)
    for key in ("test_ood", "val_ood"):
        data[key] = [_resolve_manifest(e, base_dir) for e in data.get(key) or []]
    return ExperimentConfig.model_validate(data)
