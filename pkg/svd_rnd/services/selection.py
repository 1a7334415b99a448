"""Validation-based hyperparameter selection over degradation parameter grids."""

import logging
from collections.abc import Sequence

import numpy as np

from svd_rnd.errors import InputValidationError
from svd_rnd.models import SelectionMetric, SweepReport, SweepRow, TrainConfig
from svd_rnd.services.degradations import parse_degradations
from svd_rnd.services.detection import uncertainty
from svd_rnd.services.evaluation import evaluate
from svd_rnd.services.rnd_trainer import train

logger = logging.getLogger(__name__)


def sweep(
    train_images: np.ndarray,
    base_config: TrainConfig,
    method: str,
    grid: Sequence[str],
    val_in: np.ndarray,
    val_oods: dict[str, np.ndarray],
    seeds: Sequence[int],
    metric: SelectionMetric = SelectionMetric.TNR_AT_95TPR,
) -> SweepReport:
    """Train one model per (grid value, seed) and pick the value with the best mean metric.

    Grid values are parameter strings for ``method`` (``"8+24"`` builds two
    auxiliary sets). The score of a run is the metric averaged over the
    validation OOD sets; ties go to the earlier grid value.

    Raises:
        InputValidationError: On an empty grid, seed list or validation set.
    """
    if not grid:
        raise InputValidationError("sweep grid is empty")
    if not seeds:
        raise InputValidationError("sweep needs at least one seed")
    if not val_oods:
        raise InputValidationError("sweep needs at least one validation OOD set")
    metric = SelectionMetric(metric)

    rows: list[SweepRow] = []
    mean_by_parameter: dict[str, float] = {}
    for parameter in grid:
        specs = parse_degradations(method, parameter)
        per_seed = []
        for seed in seeds:
            run_config = base_config.model_copy(
                update={"degradations": specs, "b_train": len(specs), "seed": seed}
            )
            model = train(train_images, TrainConfig.model_validate(run_config.model_dump()))
            in_scores = uncertainty(model, val_in)
            reports = [
                evaluate(in_scores, uncertainty(model, images), ood_name=name)
                for name, images in val_oods.items()
            ]
            run_score = float(np.mean([r.metric(metric) for r in reports]))
            rows.append(SweepRow(parameter=parameter, seed=seed, reports=reports, score=run_score))
            per_seed.append(run_score)
            logger.info(f"{method} {parameter} seed {seed}: {metric.value}={run_score:.4f}")
        mean_by_parameter[parameter] = float(np.mean(per_seed))

    chosen = max(grid, key=lambda p: (mean_by_parameter[p], -list(grid).index(p)))
    logger.info(f"✅ Chosen {method} parameter: {chosen} ({mean_by_parameter[chosen]:.4f})")
    return SweepReport(
        method=method,
        metric=metric,
        rows=rows,
        mean_by_parameter=mean_by_parameter,
        chosen=chosen,
    )
