"""Uncertainty scoring with a trained RndModel: RND distance, typicality, orthogonal probe."""

import csv
import logging
from pathlib import Path

import numpy as np
import torch

from svd_rnd import config
from svd_rnd.errors import InputValidationError, NumericalError
from svd_rnd.models import (
    DegradationKind,
    DegradationSpec,
    ProbeRow,
    ProbeTable,
    Scorer,
    ScoreRecord,
)
from svd_rnd.services.degradations import apply_degradation, svd_blur
from svd_rnd.services.rnd_trainer import RndModel

logger = logging.getLogger(__name__)


def _as_batch(model: RndModel, images) -> tuple[np.ndarray, bool]:
    images = np.asarray(images, dtype=np.float32)
    single = images.ndim == 3
    if single:
        images = images[None]
    if images.ndim != 4 or tuple(images.shape[1:]) != model.input_shape:
        raise InputValidationError(
            f"images have shape {images.shape}, model expects (N, *{model.input_shape})"
        )
    return images, single


def uncertainty(model: RndModel, images) -> np.ndarray | float:
    """||f(x) - g_0(x)||^2 per sample, using g_0 only.

    A single (C, H, W) image yields a float; a stack yields an array (N,).

    Raises:
        InputValidationError: If the image shape does not match the model.
    """
    batch, single = _as_batch(model, images)
    predictor, target = model.predictor, model.targets[0]
    batch_size = max(1, config.SCORE_BATCH_SIZE)
    scores = np.empty(len(batch), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(batch), batch_size):
            x = torch.as_tensor(batch[start : start + batch_size], dtype=predictor.dtype)
            diff = predictor.module(x) - target.module(x.to(target.dtype)).to(predictor.dtype)
            scores[start : start + len(x)] = diff.pow(2).sum(dim=1).double().cpu().numpy()
    if not np.all(np.isfinite(scores)):
        raise NumericalError("non-finite uncertainty")
    return float(scores[0]) if single else scores


def typicality_score(model: RndModel, images) -> np.ndarray | float:
    """|uncertainty(x) - mu| with mu the stored mean training loss.

    Raises:
        InputValidationError: If the model carries no training mean.
    """
    if model.train_loss_mean is None:
        raise InputValidationError("model has no stored mean training loss")
    values = uncertainty(model, images)
    return abs(values - model.train_loss_mean)


def score(model: RndModel, images, scorer: Scorer = Scorer.RND) -> np.ndarray:
    """Score a stack with the chosen scorer."""
    images = np.asarray(images)
    if images.ndim != 4:
        raise InputValidationError(f"expected an (N, C, H, W) stack, got shape {images.shape}")
    if Scorer(scorer) == Scorer.TYPICALITY:
        return typicality_score(model, images)
    return uncertainty(model, images)


def score_records(scores: np.ndarray, scorer: Scorer) -> list[ScoreRecord]:
    return [
        ScoreRecord(sample_index=i, uncertainty=float(s), scorer=scorer)
        for i, s in enumerate(scores)
    ]


def write_scores(scores: np.ndarray, path: str | Path, scorer: Scorer = Scorer.RND) -> Path:
    """Write ``sample_index,score`` rows with round-trippable floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["sample_index", "score"])
        for record in score_records(scores, scorer):
            writer.writerow([record.sample_index, f"{record.uncertainty:.17g}"])
    return path


def read_scores(path: str | Path) -> np.ndarray:
    """Read a score file written by ``write_scores``.

    Raises:
        InputValidationError: If the file is missing, empty or malformed.
    """
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"score file not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise InputValidationError(f"{path} holds no scores")
    try:
        values = np.array([float(row["score"]) for row in rows])
    except (KeyError, TypeError, ValueError) as e:
        raise InputValidationError(f"{path}: malformed score row ({e})") from e
    if not np.all(np.isfinite(values)):
        raise InputValidationError(f"{path}: non-finite scores")
    return values


def orthogonal_probe(
    model: RndModel,
    images,
    alphas: list[float],
    seeds: list[int],
    blur_k: int,
) -> ProbeTable:
    """Mean uncertainty on original, SVD-blurred and orthogonally perturbed data.

    Each perturbed row reports the smallest mean over ``seeds``.

    Raises:
        InputValidationError: On empty alphas or seeds, or blur_k < 1.
    """
    if not alphas:
        raise InputValidationError("orthogonal_probe needs at least one alpha")
    if not seeds:
        raise InputValidationError("orthogonal_probe needs at least one seed")
    images = np.asarray(images, dtype=np.float32)
    _as_batch(model, images)

    original = float(np.mean(uncertainty(model, images)))
    blurred = float(np.mean(uncertainty(model, svd_blur(images, blur_k))))
    rows = [
        ProbeRow(label="original", mean_uncertainty=original),
        ProbeRow(label=f"svd_blur(k={blur_k})", mean_uncertainty=blurred),
    ]
    for alpha in alphas:
        per_seed = []
        for seed in seeds:
            spec = DegradationSpec(kind=DegradationKind.ORTHOGONAL_NOISE, alpha=alpha, seed=seed)
            per_seed.append(float(np.mean(uncertainty(model, apply_degradation(images, spec)))))
        rows.append(
            ProbeRow(
                label=f"orthogonal(alpha={alpha:g})",
                alpha=alpha,
                mean_uncertainty=min(per_seed),
                per_seed=per_seed,
            )
        )
        logger.info(f"alpha={alpha:g}: min mean uncertainty {min(per_seed):.6g}")
    return ProbeTable(blur_k=blur_k, seeds=list(seeds), rows=rows)
