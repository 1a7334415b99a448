"""Service layer: numerics, degradations, training, scoring and evaluation."""

from .detection import orthogonal_probe, typicality_score, uncertainty
from .effective_rank import select_k, uniform_targets
from .evaluation import evaluate, linear_probe
from .report_renderer import ReportRenderer
from .rnd_trainer import RndModel, load_checkpoint, save_checkpoint, train

__all__ = [
    "uncertainty",
    "typicality_score",
    "orthogonal_probe",
    "select_k",
    "uniform_targets",
    "evaluate",
    "linear_probe",
    "ReportRenderer",
    "RndModel",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]
