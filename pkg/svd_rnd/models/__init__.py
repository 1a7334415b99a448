"""Pydantic data models for svd-rnd."""

from .degradation_models import (
    CONTRAST_FACTORS,
    GEOMETRIC_VARIANT_COUNTS,
    DegradationKind,
    DegradationSpec,
    OrthogonalProbeSpec,
)
from .experiment_models import (
    DatasetManifest,
    DatasetRole,
    ExperimentConfig,
    SelectionMetric,
    SourceFormat,
    SyntheticKind,
    SyntheticRecipe,
    TrainConfig,
)
from .network_models import LayerKind, LayerSpec, NetworkProfile, ProfileName
from .report_models import (
    ChannelAggregation,
    DatasetRankReport,
    EffectiveRankReport,
    EvalReport,
    EvalSummary,
    KSelection,
    LinearProbeReport,
    ProbeRow,
    ProbeTable,
    ReportTemplateMetadata,
    Scorer,
    ScoreRecord,
    StepLogEntry,
    SweepReport,
    SweepRow,
)

__all__ = [
    "CONTRAST_FACTORS",
    "GEOMETRIC_VARIANT_COUNTS",
    "DegradationKind",
    "DegradationSpec",
    "OrthogonalProbeSpec",
    "DatasetManifest",
    "DatasetRole",
    "ExperimentConfig",
    "SelectionMetric",
    "SourceFormat",
    "SyntheticKind",
    "SyntheticRecipe",
    "TrainConfig",
    "LayerKind",
    "LayerSpec",
    "NetworkProfile",
    "ProfileName",
    "ChannelAggregation",
    "DatasetRankReport",
    "EffectiveRankReport",
    "EvalReport",
    "EvalSummary",
    "KSelection",
    "LinearProbeReport",
    "ProbeRow",
    "ProbeTable",
    "ReportTemplateMetadata",
    "Scorer",
    "ScoreRecord",
    "StepLogEntry",
    "SweepReport",
    "SweepRow",
]
