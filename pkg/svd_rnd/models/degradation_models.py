"""Pydantic models describing auxiliary-dataset degradations."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DegradationKind(str, Enum):
    """Available degradation kinds."""

    SVD_BLUR = "svd_blur"
    DCT_BLUR = "dct_blur"
    GAUSSIAN_BLUR = "gaussian_blur"
    FLIP = "flip"
    ROTATE = "rotate"
    TRANSLATE_V = "translate_v"
    TRANSLATE_H = "translate_h"
    SHEAR_V = "shear_v"
    SHEAR_H = "shear_h"
    CONTRAST = "contrast"
    INVERT = "invert"
    ORTHOGONAL_NOISE = "orthogonal_noise"

    @property
    def is_geometric(self) -> bool:
        return self in GEOMETRIC_VARIANT_COUNTS

    @property
    def needs_magnitude(self) -> bool:
        return self in _MAGNITUDE_KINDS


# Variants produced per source image
GEOMETRIC_VARIANT_COUNTS: dict[DegradationKind, int] = {
    DegradationKind.FLIP: 1,
    DegradationKind.ROTATE: 3,
    DegradationKind.TRANSLATE_V: 2,
    DegradationKind.TRANSLATE_H: 2,
    DegradationKind.SHEAR_V: 2,
    DegradationKind.SHEAR_H: 2,
    DegradationKind.CONTRAST: 3,
    DegradationKind.INVERT: 1,
}

_MAGNITUDE_KINDS = {
    DegradationKind.TRANSLATE_V,
    DegradationKind.TRANSLATE_H,
    DegradationKind.SHEAR_V,
    DegradationKind.SHEAR_H,
}

CONTRAST_FACTORS = (0.5, 0.25, 0.125)

# =============================================================================
# Reference hyperparameter grids
# =============================================================================

SVD_K_GRID_SINGLE = (18, 20, 22, 24, 25, 26, 27, 28)
SVD_K_GRID_PAIR = ((8, 10, 12, 14), (22, 24, 26, 28))
SVD_K_GRID_SMALL = (5, 10, 15)
DCT_KEEP_GRID_SINGLE = (4, 8, 12, 14, 16, 20, 24, 28)
DCT_KEEP_GRID_PAIR = ((20, 24, 28, 32), (40, 44, 48, 52))
GAUSSIAN_KERNEL_SIZES = (1, 3, 5)
SHIFT_MAGNITUDES = (4, 8, 12, 16)
ORTHOGONAL_ALPHAS = (5.0, 10.0, 15.0, 20.0)

_SVD_GRID = set(SVD_K_GRID_SINGLE) | set(SVD_K_GRID_SMALL) | {k for g in SVD_K_GRID_PAIR for k in g}
_DCT_GRID = set(DCT_KEEP_GRID_SINGLE) | {k for g in DCT_KEEP_GRID_PAIR for k in g}


class DegradationSpec(BaseModel):
    """Declarative description of one auxiliary-dataset transform.

    Only the parameter matching ``kind`` is meaningful:
    ``k`` (svd_blur, discarded singular values per channel), ``keep``
    (dct_blur, retained coefficients), ``kernel`` (gaussian_blur),
    ``magnitude`` (translations and shears, pixels), ``alpha`` and ``seed``
    (orthogonal_noise).
    """

    model_config = ConfigDict(frozen=True)

    kind: DegradationKind
    k: int | None = Field(None, ge=1, description="Discarded singular values per channel")
    keep: int | None = Field(None, ge=1, description="Retained DCT coefficients per channel")
    kernel: tuple[int, int] | None = Field(None, description="Gaussian kernel (k_x, k_y)")
    magnitude: int | None = Field(None, ge=1, description="Shift in pixels")
    alpha: float | None = Field(None, gt=0, description="Perturbation norm, percent of signal")
    seed: int = Field(default=0, description="PRNG seed (orthogonal_noise only)")

    @model_validator(mode="after")
    def _check_parameters(self) -> "DegradationSpec":
        kind = self.kind
        if kind == DegradationKind.SVD_BLUR and self.k is None:
            raise ValueError("svd_blur requires k >= 1")
        if kind == DegradationKind.DCT_BLUR and self.keep is None:
            raise ValueError("dct_blur requires keep >= 1")
        if kind == DegradationKind.GAUSSIAN_BLUR:
            if self.kernel is None:
                raise ValueError("gaussian_blur requires kernel (k_x, k_y)")
            for size in self.kernel:
                if size % 2 == 0:
                    raise ValueError(f"Gaussian kernel sizes must be odd, got {self.kernel}")
                if size not in GAUSSIAN_KERNEL_SIZES:
                    raise ValueError(f"Gaussian kernel sizes must be in {GAUSSIAN_KERNEL_SIZES}")
        if kind.needs_magnitude:
            if self.magnitude is None:
                raise ValueError(f"{kind.value} requires magnitude")
            if self.magnitude not in SHIFT_MAGNITUDES:
                raise ValueError(f"{kind.value} magnitude must be in {SHIFT_MAGNITUDES}")
        if kind == DegradationKind.ORTHOGONAL_NOISE and self.alpha is None:
            raise ValueError("orthogonal_noise requires alpha > 0")
        return self

    @property
    def variant_count(self) -> int:
        """Images produced per source image."""
        return GEOMETRIC_VARIANT_COUNTS.get(self.kind, 1)

    @property
    def on_grid(self) -> bool:
        """Whether the parameters lie on a reference hyperparameter grid."""
        if self.kind == DegradationKind.SVD_BLUR:
            return self.k in _SVD_GRID
        if self.kind == DegradationKind.DCT_BLUR:
            return self.keep in _DCT_GRID
        if self.kind == DegradationKind.ORTHOGONAL_NOISE:
            return self.alpha in ORTHOGONAL_ALPHAS
        # kernel and magnitude grids are enforced by validation
        return True

    def label(self) -> str:
        """Short human-readable label, e.g. ``svd_blur(k=28)``."""
        if self.kind == DegradationKind.SVD_BLUR:
            return f"svd_blur(k={self.k})"
        if self.kind == DegradationKind.DCT_BLUR:
            return f"dct_blur(keep={self.keep})"
        if self.kind == DegradationKind.GAUSSIAN_BLUR:
            return f"gaussian_blur({self.kernel[0]}x{self.kernel[1]})"
        if self.kind.needs_magnitude:
            return f"{self.kind.value}({self.magnitude})"
        if self.kind == DegradationKind.ORTHOGONAL_NOISE:
            return f"orthogonal_noise(alpha={self.alpha:g}, seed={self.seed})"
        return self.kind.value


class OrthogonalProbeSpec(BaseModel):
    """Orthogonal perturbation: Gaussian noise orthogonal to the image."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0, description="Perturbation norm, percent of signal norm")
    seed: int = Field(default=0, description="PRNG seed")
