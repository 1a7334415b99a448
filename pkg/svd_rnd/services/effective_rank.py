"""Log effective rank (LER) of images and validation-free choice of SVD blur strength."""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from svd_rnd import config
from svd_rnd.errors import InputValidationError
from svd_rnd.models import (
    ChannelAggregation,
    DatasetRankReport,
    EffectiveRankReport,
    KSelection,
)
from svd_rnd.services.tensor_linalg import (
    as_image,
    discard_bottom_series,
    numerical_rank,
    singular_values,
    spectral_entropy_bits,
)

logger = logging.getLogger(__name__)

_CHUNK_SIZE = 256


def channel_lers(images: np.ndarray) -> np.ndarray:
    """Per-channel LER in bits for a stack (..., C, H, W).

    Returns an array shaped like the input without the last two axes.
    """
    return spectral_entropy_bits(singular_values(images))


def _aggregate(lers: np.ndarray, aggregation: ChannelAggregation) -> np.ndarray:
    """Combine per-channel LERs (last axis) into image LERs."""
    if aggregation == ChannelAggregation.EFFECTIVE_RANK:
        return np.log2(np.mean(np.exp2(lers), axis=-1))
    return np.mean(lers, axis=-1)


def image_lers(
    images: np.ndarray, aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK
) -> np.ndarray:
    """Image LER for every image of a stack (N, C, H, W)."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise InputValidationError(f"dataset must have shape (N, C, H, W), got {images.shape}")
    return _aggregate(channel_lers(images), aggregation)


def image_ler(
    image: np.ndarray, aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK
) -> EffectiveRankReport:
    """Spectral-entropy summary of one (C, H, W) image.

    Rank-0 channels contribute LER 0 (effective rank 1) and are listed in
    ``zero_channels``.
    """
    image = as_image(image)
    spectra = singular_values(image)
    lers = spectral_entropy_bits(spectra)
    zero = [int(c) for c in np.flatnonzero(numerical_rank(spectra) == 0)]
    if zero:
        logger.debug(f"Rank-0 channels {zero} treated as LER 0")
    value = float(_aggregate(lers, aggregation))
    return EffectiveRankReport(
        per_channel_ler=[float(v) for v in lers],
        image_ler=value,
        effective_rank=float(2.0**value),
        zero_channels=zero,
    )


def dataset_ler(
    images: np.ndarray, aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK
) -> float:
    """Mean image LER over a dataset.

    Raises:
        InputValidationError: On an empty dataset.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or len(images) == 0:
        raise InputValidationError("dataset_ler needs a non-empty (N, C, H, W) stack")
    return float(image_lers(images, aggregation).mean())


def uniform_targets(ler_train: float, b_train: int) -> list[float]:
    """Target LERs spread uniformly between half and all of ``ler_train``.

    Target i (1-based) is ``(0.5 + 0.5 * (i - 1) / b_train) * ler_train``.
    """
    if b_train < 1:
        raise InputValidationError(f"b_train must be >= 1, got {b_train}")
    if ler_train < 0:
        raise InputValidationError(f"ler_train must be >= 0, got {ler_train}")
    return [(0.5 + 0.5 * (i - 1) / b_train) * ler_train for i in range(1, b_train + 1)]


def _chunk_curve(
    chunk: np.ndarray, candidates: Sequence[int], aggregation: ChannelAggregation
) -> np.ndarray:
    sums = np.empty(len(candidates))
    for index, blurred in enumerate(discard_bottom_series(chunk, candidates)):
        sums[index] = _aggregate(channel_lers(np.clip(blurred, 0.0, 1.0)), aggregation).sum()
    return sums


def blurred_ler_curve(
    images: np.ndarray,
    candidates: Sequence[int],
    aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK,
) -> dict[int, float]:
    """Mean LER of the SVD-blurred dataset for each candidate K.

    One SVD per chunk serves every candidate; chunks run concurrently.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or len(images) == 0:
        raise InputValidationError("blurred_ler_curve needs a non-empty (N, C, H, W) stack")
    candidates = list(candidates)
    if not candidates or min(candidates) < 1:
        raise InputValidationError("candidate K values must be >= 1")

    starts = range(0, len(images), _CHUNK_SIZE)
    with ThreadPoolExecutor(max_workers=max(1, config.NUM_THREADS)) as pool:
        partial = list(
            pool.map(
                lambda s: _chunk_curve(images[s : s + _CHUNK_SIZE], candidates, aggregation),
                starts,
            )
        )
    means = np.sum(partial, axis=0) / len(images)
    return {int(k): float(v) for k, v in zip(candidates, means)}


def select_k(
    images: np.ndarray,
    b_train: int,
    aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK,
    candidates: Sequence[int] | None = None,
) -> KSelection:
    """Choose K_i for each auxiliary dataset by matching LER targets.

    Candidates default to K = 1 .. min(H, W) - 1. Each target takes the
    candidate whose blurred LER is closest; ties go to the smaller K.

    Raises:
        InputValidationError: On an empty dataset, b_train < 1 or images
            too small to blur.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or len(images) == 0:
        raise InputValidationError("select_k needs a non-empty (N, C, H, W) stack")
    if b_train < 1:
        raise InputValidationError(f"b_train must be >= 1, got {b_train}")
    if candidates is None:
        limit = min(images.shape[-2:])
        if limit < 2:
            raise InputValidationError(
                f"images of size {images.shape[-2:]} cannot be SVD-blurred"
            )
        candidates = range(1, limit)
    candidates = sorted(set(int(k) for k in candidates))

    ler_train = dataset_ler(images, aggregation)
    degenerate = ler_train <= 0.0
    if degenerate:
        logger.warning("⚠️  Training spectrum has zero spread; every target is 0")
    targets = uniform_targets(max(ler_train, 0.0), b_train)
    curve = blurred_ler_curve(images, candidates, aggregation)

    chosen: list[int] = []
    for target in targets:
        best = candidates[0]
        for k in candidates[1:]:
            if abs(curve[k] - target) < abs(curve[best] - target):
                best = k
        chosen.append(best)

    logger.info(f"LER_train={ler_train:.4f} bits, chosen K={chosen}")
    return KSelection(
        b_train=b_train,
        ler_train=ler_train,
        targets=targets,
        chosen_k=chosen,
        achieved_ler=[curve[k] for k in chosen],
        candidates=curve,
        aggregation=aggregation,
        degenerate=degenerate,
    )


def dataset_rank_report(
    images: np.ndarray,
    name: str,
    aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK,
) -> DatasetRankReport:
    """Dataset LER summary, counting images that have at least one rank-0 channel."""
    value = dataset_ler(images, aggregation)
    ranks = numerical_rank(singular_values(images))
    return DatasetRankReport(
        name=name,
        count=len(images),
        dataset_ler=value,
        effective_rank=float(2.0**value),
        aggregation=aggregation,
        zero_channel_images=int(np.count_nonzero((ranks == 0).any(axis=-1))),
    )
