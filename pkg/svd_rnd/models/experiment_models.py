"""Pydantic models for datasets, training and experiment configuration."""

import hashlib
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from svd_rnd import config

from .degradation_models import DegradationSpec
from .network_models import ProfileName


class DatasetRole(str, Enum):
    """Role a dataset plays in an experiment."""

    TRAIN = "train"
    TEST_IN = "test_in"
    TEST_OOD = "test_ood"
    VAL_OOD = "val_ood"


class SourceFormat(str, Enum):
    """On-disk dataset formats that can be ingested."""

    RNDT = "rndt"
    CIFAR = "cifar"


class SyntheticKind(str, Enum):
    """Synthetic corpus generators."""

    SMOOTH_TEXTURES = "smooth_textures"
    CHECKER = "checker"
    BLOBS = "blobs"
    HIGHFREQ_NOISE = "highfreq_noise"


class SelectionMetric(str, Enum):
    """Metric used to pick hyperparameters against validation OOD data."""

    AUROC = "auroc"
    AUPR_IN = "aupr_in"
    AUPR_OUT = "aupr_out"
    DETECTION_ACCURACY = "detection_accuracy"
    TNR_AT_95TPR = "tnr_at_95tpr"


class SyntheticRecipe(BaseModel):
    """Parameters that regenerate a synthetic corpus exactly."""

    model_config = ConfigDict(frozen=True)

    kind: SyntheticKind
    n: int = Field(..., ge=1)
    shape: tuple[int, int, int] = Field(default=(3, 32, 32), description="(C, H, W)")
    seed: int = 0


class DatasetManifest(BaseModel):
    """Where a dataset comes from and what it should contain."""

    name: str
    source: str | None = Field(None, description="Container or CIFAR binary path")
    labels_source: str | None = Field(None, description="Optional label container path")
    format: SourceFormat = SourceFormat.RNDT
    recipe: SyntheticRecipe | None = None
    count: int = Field(..., gt=0, description="Number of images to take")
    shape: tuple[int, int, int] = Field(..., description="(C, H, W)")
    role: DatasetRole = DatasetRole.TRAIN
    seed: int = 0
    resize_to: int | None = Field(None, ge=1, description="Bilinear resize to resize_to²")
    mean_ler: float | None = Field(None, description="Mean dataset LER, recorded by generators")

    @model_validator(mode="after")
    def _check_source(self) -> "DatasetManifest":
        if (self.source is None) == (self.recipe is None):
            raise ValueError("manifest needs exactly one of 'source' or 'recipe'")
        return self


class TrainConfig(BaseModel):
    """Training schedule and auxiliary datasets for one predictor."""

    b_train: int = Field(default=1, ge=0, description="Number of auxiliary datasets")
    degradations: list[DegradationSpec] = Field(default_factory=list)
    profile: ProfileName = ProfileName.TINY
    feature_dim: int = Field(default=128, ge=1)
    epochs: int | None = Field(None, ge=1, description="None applies the fixed-update rule")
    total_updates: int | None = Field(None, ge=1, description="Overrides epochs when set")
    base_lr: float = Field(default=1e-4, gt=0)
    annealed_lr: float = Field(default=1e-5, gt=0)
    batch_size: int = Field(default_factory=lambda: config.BATCH_SIZE, ge=1)
    seed: int = 0
    train_fraction: float = Field(default=1.0, gt=0, le=1)

    @model_validator(mode="after")
    def _check_specs(self) -> "TrainConfig":
        if len(self.degradations) != self.b_train:
            raise ValueError(
                f"b_train={self.b_train} but {len(self.degradations)} degradations given"
            )
        return self

    def fingerprint(self) -> str:
        """Stable hash of the configuration."""
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()


class ExperimentConfig(BaseModel):
    """Everything the CLI needs to run an experiment end to end."""

    train: DatasetManifest
    test_in: DatasetManifest
    test_ood: list[DatasetManifest] = Field(default_factory=list)
    val_ood: list[DatasetManifest] = Field(
        default_factory=list, description="Defaults to the head of each test OOD set"
    )
    training: TrainConfig = Field(default_factory=TrainConfig)
    selection_metric: SelectionMetric = SelectionMetric.TNR_AT_95TPR
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: str = "runs"

    @model_validator(mode="after")
    def _check_seeds(self) -> "ExperimentConfig":
        if not self.seeds:
            raise ValueError("at least one seed is required")
        return self

    def fingerprint(self) -> str:
        """Stable hash of the configuration."""
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()
