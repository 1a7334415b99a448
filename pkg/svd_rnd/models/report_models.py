"""Pydantic models for reports produced by the services."""

from enum import Enum

from pydantic import BaseModel, Field

from .experiment_models import SelectionMetric


class ChannelAggregation(str, Enum):
    """How per-channel spectra combine into an image LER."""

    EFFECTIVE_RANK = "effective_rank"  # log2 of mean per-channel effective rank
    LOG_EFFECTIVE_RANK = "log_effective_rank"  # mean per-channel LER


class Scorer(str, Enum):
    """Uncertainty scorers."""

    RND = "rnd"
    TYPICALITY = "typicality"


class EffectiveRankReport(BaseModel):
    """Spectral-entropy summary of one image."""

    per_channel_ler: list[float] = Field(..., description="Bits per channel")
    image_ler: float = Field(..., ge=0, description="Bits")
    effective_rank: float = Field(..., ge=1)
    zero_channels: list[int] = Field(default_factory=list, description="Rank-0 channels")


class DatasetRankReport(BaseModel):
    """Dataset-level LER summary."""

    name: str
    count: int
    dataset_ler: float
    effective_rank: float
    aggregation: ChannelAggregation
    zero_channel_images: int = 0


class KSelection(BaseModel):
    """Validation-free choice of discarded singular values per auxiliary set."""

    b_train: int = Field(..., ge=1)
    ler_train: float
    targets: list[float]
    chosen_k: list[int]
    achieved_ler: list[float]
    candidates: dict[int, float] = Field(
        default_factory=dict, description="Mean blurred LER per candidate K"
    )
    aggregation: ChannelAggregation = ChannelAggregation.EFFECTIVE_RANK
    degenerate: bool = Field(default=False, description="Training spectrum has zero spread")


class ScoreRecord(BaseModel):
    """One sample's uncertainty."""

    sample_index: int = Field(..., ge=0)
    uncertainty: float
    scorer: Scorer


class EvalReport(BaseModel):
    """The five detection metrics for one (in, ood) score pair."""

    auroc: float = Field(..., ge=0, le=1)
    aupr_in: float = Field(..., ge=0, le=1)
    aupr_out: float = Field(..., ge=0, le=1)
    detection_accuracy: float = Field(..., ge=0, le=1)
    tnr_at_95tpr: float = Field(..., ge=0, le=1)
    in_count: int = Field(..., gt=0)
    ood_count: int = Field(..., gt=0)
    ood_name: str | None = None

    def metric(self, name: SelectionMetric) -> float:
        return getattr(self, name.value)


class ProbeRow(BaseModel):
    """One row of the orthogonal-perturbation table."""

    label: str
    alpha: float | None = None
    mean_uncertainty: float
    per_seed: list[float] = Field(default_factory=list)


class ProbeTable(BaseModel):
    """Mean uncertainty on original, blurred and perturbed data."""

    blur_k: int
    seeds: list[int]
    rows: list[ProbeRow]


class StepLogEntry(BaseModel):
    """One optimizer update."""

    step: int
    dataset_index: int
    loss: float
    lr: float


class SweepRow(BaseModel):
    """Validation result of one (parameter, seed) training run."""

    parameter: str
    seed: int
    reports: list[EvalReport]
    score: float = Field(..., description="Selection metric averaged over validation sets")


class SweepReport(BaseModel):
    """Validation-based hyperparameter selection."""

    method: str
    metric: SelectionMetric
    rows: list[SweepRow]
    mean_by_parameter: dict[str, float]
    chosen: str


class ReportTemplateMetadata(BaseModel):
    """Metadata for a Markdown report template."""

    name: str = Field(..., description="Display name")
    description: str = Field(..., description="Short description")
    file: str = Field(..., description="Jinja2 template file")


class EvalSummary(BaseModel):
    """Metrics for one in-distribution score set against every OOD set."""

    label: str = "RND"
    reports: list[EvalReport]
    table_row: str | None = None


class LinearProbeReport(BaseModel):
    """Held-out accuracy of a linear head on frozen predictor features."""

    accuracy: float = Field(..., ge=0, le=1)
    depth: int = Field(..., ge=1, description="Predictor layers the features come from")
    schedule: str
    feature_dim: int
    classes: int = Field(..., ge=2)
    train_fraction: float
