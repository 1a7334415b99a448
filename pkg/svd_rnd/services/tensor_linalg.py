"""Dense small-matrix numerics: image tensors, per-channel SVD, 2-D DCT and entropy.

Images are ``numpy`` arrays shaped ``(C, H, W)``; datasets stack them as
``(N, C, H, W)``. Every function here is pure and works on stacks of
matrices along the last two axes where that is cheaper than looping.
"""

from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np
from scipy import fft, stats

from svd_rnd.errors import InputValidationError

# Singular values at or below this fraction of sigma_max count as zero
RANK_TOLERANCE = 1e-9


def as_image(
    data, channels: int | None = None, height: int | None = None, width: int | None = None
):
    """Validate and return an image tensor of shape (C, H, W).

    Args:
        data: Array-like of shape (C, H, W), or a flat sequence when the
            dimensions are given explicitly (row-major per channel).
        channels, height, width: Optional explicit dimensions.

    Returns:
        float64 array of shape (C, H, W)

    Raises:
        InputValidationError: On wrong size/rank or non-finite values.
    """
    array = np.asarray(data, dtype=np.float64)
    if channels is not None and height is not None and width is not None:
        if array.size != channels * height * width:
            raise InputValidationError(
                f"image data has {array.size} values, expected {channels}x{height}x{width}"
            )
        array = array.reshape(channels, height, width)
    if array.ndim != 3 or min(array.shape) < 1:
        raise InputValidationError(f"image must have shape (C, H, W), got {array.shape}")
    _require_finite(array, "image")
    return array


def _require_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise InputValidationError(f"{what} contains {bad} non-finite value(s)")


def numerical_rank(singular_values: np.ndarray) -> np.ndarray:
    """Count singular values above RANK_TOLERANCE * sigma_max along the last axis."""
    singular_values = np.asarray(singular_values, dtype=np.float64)
    sigma_max = singular_values.max(axis=-1, keepdims=True) if singular_values.shape[-1] else 0.0
    return np.count_nonzero(singular_values > RANK_TOLERANCE * sigma_max, axis=-1)


@dataclass(frozen=True)
class SingularDecomposition:
    """Thin SVD of one channel: A = U diag(sigma) V^T.

    ``right_vectors`` holds V^T (rows are v_t). ``rank`` counts the nonzero
    singular values; only the first ``rank`` triples take part in
    reconstruction.
    """

    left_vectors: np.ndarray  # H x r
    singular_values: np.ndarray  # r, descending
    right_vectors: np.ndarray  # r x W
    rank: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.left_vectors.shape[0], self.right_vectors.shape[1]


def svd(matrix) -> SingularDecomposition:
    """Singular value decomposition of an H x W matrix.

    Raises:
        InputValidationError: On non-2-D or non-finite input.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise InputValidationError(f"svd expects a 2-D matrix, got shape {matrix.shape}")
    _require_finite(matrix, "matrix")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    return SingularDecomposition(
        left_vectors=u, singular_values=s, right_vectors=vt, rank=int(numerical_rank(s))
    )


def reconstruct(decomp: SingularDecomposition, keep: int) -> np.ndarray:
    """Sum of the leading ``keep`` rank-one terms sigma_t u_t v_t^T.

    ``keep`` above the rank is clamped to the rank; ``keep = 0`` yields zeros.
    """
    if keep < 0:
        raise InputValidationError(f"keep must be >= 0, got {keep}")
    keep = min(keep, decomp.rank)
    u = decomp.left_vectors[:, :keep]
    s = decomp.singular_values[:keep]
    vt = decomp.right_vectors[:keep, :]
    return (u * s) @ vt


def singular_values(stack: np.ndarray) -> np.ndarray:
    """Singular values of every matrix in a stack (..., H, W), descending."""
    return np.linalg.svd(np.asarray(stack, dtype=np.float64), compute_uv=False)


def discard_bottom_series(stack: np.ndarray, discards: Iterable[int]) -> Iterator[np.ndarray]:
    """Yield truncations of a stack for several discard counts from one SVD.

    For each ``discard`` every matrix keeps ``max(rank - discard, 0)``
    leading components, so a discard at or above the rank yields zeros.
    """
    stack = np.asarray(stack, dtype=np.float64)
    _require_finite(stack, "matrix stack")
    u, s, vt = np.linalg.svd(stack, full_matrices=False)
    rank = numerical_rank(s)
    positions = np.arange(s.shape[-1])
    for discard in discards:
        mask = positions < np.maximum(np.asarray(rank) - discard, 0)[..., None]
        yield (u * np.where(mask, s, 0.0)[..., None, :]) @ vt


def discard_bottom(stack: np.ndarray, discard: int) -> np.ndarray:
    """Zero the bottom ``discard`` nonzero singular values of every matrix in a stack."""
    return next(discard_bottom_series(stack, [discard]))


def dct2(matrix) -> np.ndarray:
    """Orthonormal type-II 2-D DCT over the last two axes."""
    matrix = np.asarray(matrix, dtype=np.float64)
    _require_finite(matrix, "matrix")
    return fft.dctn(matrix, type=2, norm="ortho", axes=(-2, -1))


def idct2(coeffs) -> np.ndarray:
    """Inverse of dct2."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _require_finite(coeffs, "coefficients")
    return fft.idctn(coeffs, type=2, norm="ortho", axes=(-2, -1))


def shannon_entropy_bits(weights) -> float:
    """Base-2 entropy of nonnegative weights normalized to a distribution.

    Raises:
        InputValidationError: On negative, non-finite or all-zero weights.
    """
    weights = np.asarray(weights, dtype=np.float64).ravel()
    _require_finite(weights, "weights")
    if np.any(weights < 0):
        raise InputValidationError("entropy weights must be nonnegative")
    if weights.sum() <= 0:
        raise InputValidationError("entropy weights are all zero")
    return float(stats.entropy(weights, base=2))


def spectral_entropy_bits(spectra: np.ndarray) -> np.ndarray:
    """Entropy in bits of each spectrum along the last axis.

    Values at or below RANK_TOLERANCE * max are treated as exact zeros, and
    all-zero spectra get entropy 0 (the rank-0 convention).
    """
    spectra = np.asarray(spectra, dtype=np.float64)
    peak = spectra.max(axis=-1, keepdims=True)
    cleaned = np.where(spectra > RANK_TOLERANCE * peak, spectra, 0.0)
    totals = cleaned.sum(axis=-1)
    safe = np.where(totals[..., None] > 0, cleaned, 1.0)
    entropy = stats.entropy(safe, base=2, axis=-1)
    return np.where(totals > 0, entropy, 0.0)
