"""Auxiliary proxy-OOD datasets: blurs, geometric transforms and orthogonal noise.

Per-image functions take and return ``(C, H, W)`` arrays. Dataset-level
helpers accept ``(N, C, H, W)`` stacks and vectorize where numpy allows.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from svd_rnd import config
from svd_rnd.errors import InputValidationError
from svd_rnd.models import (
    CONTRAST_FACTORS,
    DegradationKind,
    DegradationSpec,
    OrthogonalProbeSpec,
)
from svd_rnd.services.tensor_linalg import as_image, dct2, discard_bottom, idct2

logger = logging.getLogger(__name__)

# Images per worker task in dataset-level builders
_CHUNK_SIZE = 256

# Resampling cap for degenerate orthogonal components
_MAX_RESAMPLES = 100


# =============================================================================
# Blurs
# =============================================================================


def svd_blur(image: np.ndarray, k: int) -> np.ndarray:
    """Discard the bottom ``k`` nonzero singular values of every channel.

    Works on a single image (C, H, W) or a stack (N, C, H, W); output is
    clamped to [0, 1].
    """
    if k < 1:
        raise InputValidationError(f"svd_blur needs k >= 1, got {k}")
    return np.clip(discard_bottom(image, k), 0.0, 1.0)


def dct_blur(image: np.ndarray, keep: int) -> np.ndarray:
    """Keep the ``keep`` largest-magnitude DCT coefficients per channel.

    Works on (C, H, W) or (N, C, H, W); output is clamped to [0, 1].
    Ties in magnitude are broken by coefficient position (row-major).
    """
    image = np.asarray(image, dtype=np.float64)
    height, width = image.shape[-2:]
    if not 1 <= keep <= height * width:
        raise InputValidationError(f"dct_blur keep must be in [1, {height * width}], got {keep}")
    coeffs = dct2(image)
    flat = coeffs.reshape(*coeffs.shape[:-2], height * width)
    order = np.argsort(-np.abs(flat), axis=-1, kind="stable")
    mask = np.zeros(flat.shape, dtype=bool)
    np.put_along_axis(mask, order[..., :keep], True, axis=-1)
    pruned = np.where(mask, flat, 0.0).reshape(coeffs.shape)
    return np.clip(idct2(pruned), 0.0, 1.0)


def gaussian_kernel_1d(size: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps; sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8."""
    if size < 1 or size % 2 == 0:
        raise InputValidationError(f"Gaussian kernel size must be odd and positive, got {size}")
    sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2
    taps = np.exp(-(offsets**2) / (2 * sigma**2))
    return taps / taps.sum()


def gaussian_blur(image: np.ndarray, kernel: tuple[int, int]) -> np.ndarray:
    """Separable Gaussian blur with reflect-padded borders.

    ``kernel`` is (k_x, k_y): k_x taps along the width, k_y along the height.
    """
    k_x, k_y = kernel
    image = np.asarray(image, dtype=np.float64)
    out = ndimage.correlate1d(image, gaussian_kernel_1d(k_x), axis=-1, mode="reflect")
    return ndimage.correlate1d(out, gaussian_kernel_1d(k_y), axis=-2, mode="reflect")


# =============================================================================
# Geometric transforms
# =============================================================================


def _shift(image: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return ndimage.shift(image, (0, rows, cols), order=0, mode="constant", cval=0.0)


def _shear(image: np.ndarray, slope: float, vertical: bool) -> np.ndarray:
    """Shear about the image center, zero-filled.

    Horizontal shear moves row r by round(slope * (r - center)) columns;
    vertical shear moves column c by round(slope * (c - center)) rows.
    """
    _, height, width = image.shape
    out = np.zeros_like(image)
    if vertical:
        center = (width - 1) / 2
        for col in range(width):
            offset = int(np.round(slope * (col - center)))
            out[:, :, col] = _shift(image[:, :, col : col + 1], offset, 0)[:, :, 0]
    else:
        center = (height - 1) / 2
        for row in range(height):
            offset = int(np.round(slope * (row - center)))
            out[:, row, :] = _shift(image[:, row : row + 1, :], 0, offset)[:, 0, :]
    return out


def geometric_transform(
    image: np.ndarray, kind: DegradationKind, magnitude: int | None = None
) -> list[np.ndarray]:
    """Return every variant of a geometric transform of one image.

    Variant counts: flip 1, rotate 3 (90/180/270 degrees), translations and
    shears 2 (+/- magnitude), contrast 3, invert 1.

    Raises:
        InputValidationError: For non-geometric kinds, a missing magnitude, or rotating a
            non-square image.
    """
    image = as_image(image)
    if not DegradationKind(kind).is_geometric:
        raise InputValidationError(f"{kind} is not a geometric transform")
    kind = DegradationKind(kind)
    if kind.needs_magnitude and magnitude is None:
        raise InputValidationError(f"{kind.value} requires a magnitude")

    if kind == DegradationKind.FLIP:
        return [image[:, :, ::-1].copy()]
    if kind == DegradationKind.ROTATE:
        if image.shape[1] != image.shape[2]:
            raise InputValidationError(f"rotate needs square images, got {image.shape[1:]}")
        return [np.rot90(image, turns, axes=(1, 2)).copy() for turns in (1, 2, 3)]
    if kind == DegradationKind.TRANSLATE_V:
        return [_shift(image, sign * magnitude, 0) for sign in (1, -1)]
    if kind == DegradationKind.TRANSLATE_H:
        return [_shift(image, 0, sign * magnitude) for sign in (1, -1)]
    if kind in (DegradationKind.SHEAR_V, DegradationKind.SHEAR_H):
        size = image.shape[1]
        vertical = kind == DegradationKind.SHEAR_V
        return [_shear(image, sign * magnitude / size, vertical) for sign in (1, -1)]
    if kind == DegradationKind.CONTRAST:
        mean = image.mean(axis=(1, 2), keepdims=True)
        return [mean + factor * (image - mean) for factor in CONTRAST_FACTORS]
    # invert
    return [1.0 - image]


# =============================================================================
# Orthogonal perturbation
# =============================================================================


def orthogonal_perturb(image: np.ndarray, spec: OrthogonalProbeSpec) -> np.ndarray:
    """Add Gaussian noise orthogonal to the flattened image, scaled to alpha% of its norm.

    No clamping is applied. A numerically degenerate orthogonal component is
    resampled with the next seed.

    Raises:
        InputValidationError: If the image is all zeros.
    """
    image = as_image(image)
    x = image.ravel()
    x_norm_sq = float(x @ x)
    if x_norm_sq == 0.0:
        raise InputValidationError("orthogonal_perturb needs a nonzero image")

    seed = spec.seed
    for _ in range(_MAX_RESAMPLES):
        z = np.random.default_rng(seed).standard_normal(x.size)
        z_orth = z - (z @ x) / x_norm_sq * x
        z_orth_norm = float(np.linalg.norm(z_orth))
        if z_orth_norm >= 1e-12 * float(np.linalg.norm(z)):
            break
        logger.warning(f"Degenerate orthogonal component for seed {seed}, resampling")
        seed += 1
    else:
        raise InputValidationError("could not sample a non-degenerate orthogonal component")

    scale = (spec.alpha / 100.0) * np.sqrt(x_norm_sq) / z_orth_norm
    return (x + scale * z_orth).reshape(image.shape)


# =============================================================================
# Dataset builders
# =============================================================================


def _degrade_one(image: np.ndarray, spec: DegradationSpec, index: int) -> list[np.ndarray]:
    try:
        if spec.kind == DegradationKind.ORTHOGONAL_NOISE:
            # Per-image stream keyed by (seed, index), independent of chunking
            image_seed = int(np.random.SeedSequence([spec.seed, index]).generate_state(1)[0])
            probe = OrthogonalProbeSpec(alpha=spec.alpha, seed=image_seed)
            return [orthogonal_perturb(image, probe)]
        return geometric_transform(image, spec.kind, spec.magnitude)
    except InputValidationError as e:
        raise InputValidationError(f"{spec.label()} failed on image {index}: {e}") from e


def _apply_chunk(images: np.ndarray, spec: DegradationSpec, start: int) -> np.ndarray:
    kind = spec.kind
    if kind == DegradationKind.SVD_BLUR:
        return svd_blur(images, spec.k)
    if kind == DegradationKind.DCT_BLUR:
        return dct_blur(images, spec.keep)
    if kind == DegradationKind.GAUSSIAN_BLUR:
        return gaussian_blur(images, spec.kernel)
    outputs = [_degrade_one(img, spec, start + i) for i, img in enumerate(images)]
    return np.stack([v for group in outputs for v in group])


def apply_degradation(images: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply one spec to a dataset stack (N, C, H, W).

    Geometric kinds return all variants image-major, so the result holds
    ``spec.variant_count * N`` images. Chunks are processed concurrently and
    reassembled in order.

    Raises:
        InputValidationError: If a chunk fails; the message names its first image index.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise InputValidationError(f"dataset must have shape (N, C, H, W), got {images.shape}")
    if not spec.on_grid:
        logger.warning(f"Off-grid degradation parameters: {spec.label()}")

    starts = list(range(0, len(images), _CHUNK_SIZE))

    if not np.all(np.isfinite(images)):
        bad = int(np.argmax(~np.isfinite(images).reshape(len(images), -1).all(axis=1)))
        raise InputValidationError(f"{spec.label()}: image {bad} has non-finite values")

    def run(start: int) -> np.ndarray:
        return _apply_chunk(images[start : start + _CHUNK_SIZE], spec, start)

    with ThreadPoolExecutor(max_workers=max(1, config.NUM_THREADS)) as pool:
        chunks = list(pool.map(run, starts))
    if not chunks:
        return images.copy()
    return np.concatenate(chunks).astype(np.float32)


def build_aux_datasets(images: np.ndarray, specs: Sequence[DegradationSpec]) -> list[np.ndarray]:
    """Derive one auxiliary dataset per spec from a source stack.

    Mixing blur and geometric specs in one list expresses the combined
    blurred-plus-transformed training setup.
    """
    if not specs:
        raise InputValidationError("build_aux_datasets needs at least one spec")
    datasets = []
    for spec in specs:
        derived = apply_degradation(images, spec)
        logger.info(f"Built auxiliary dataset {spec.label()}: {len(derived)} images")
        datasets.append(derived)
    return datasets


# =============================================================================
# Parameter strings
# =============================================================================

METHODS = ("svd", "dct", "gauss", "geom", "orthogonal")


def parse_degradation(method: str, param: str) -> DegradationSpec:
    """Build a spec from a command-line method and parameter string.

    Formats: svd ``"28"``; dct ``"16"``; gauss ``"3x5"`` (k_x x k_y);
    geom ``"rotate"`` or ``"translate_v:8"``; orthogonal ``"20"`` or ``"20:7"``
    (alpha[:seed]).

    Raises:
        InputValidationError: On an unknown method or malformed parameter.
    """
    param = param.strip()
    try:
        if method == "svd":
            return DegradationSpec(kind=DegradationKind.SVD_BLUR, k=int(param))
        if method == "dct":
            return DegradationSpec(kind=DegradationKind.DCT_BLUR, keep=int(param))
        if method == "gauss":
            k_x, k_y = (int(v) for v in param.lower().split("x"))
            return DegradationSpec(kind=DegradationKind.GAUSSIAN_BLUR, kernel=(k_x, k_y))
        if method == "geom":
            name, _, magnitude = param.partition(":")
            kind = DegradationKind(name)
            if not kind.is_geometric:
                raise InputValidationError(f"{name} is not a geometric transform")
            return DegradationSpec(kind=kind, magnitude=int(magnitude) if magnitude else None)
        if method == "orthogonal":
            alpha, _, seed = param.partition(":")
            return DegradationSpec(
                kind=DegradationKind.ORTHOGONAL_NOISE, alpha=float(alpha), seed=int(seed or 0)
            )
    except InputValidationError:
        raise
    except ValueError as e:
        # pydantic ValidationError is a ValueError too
        raise InputValidationError(f"bad {method} parameter {param!r}: {e}") from e
    raise InputValidationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def parse_degradations(method: str, param: str) -> list[DegradationSpec]:
    """Parse ``"+"``-joined parameters into one spec per auxiliary dataset, e.g. ``"8+24"``."""
    return [parse_degradation(method, part) for part in param.split("+")]
