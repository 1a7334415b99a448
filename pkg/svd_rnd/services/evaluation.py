"""Detection metrics over uncertainty scores and the linear representation probe.

Scores are uncertainties: higher means more anomalous. In-distribution is the
positive class for TPR and is accepted at low uncertainty.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np
import torch
from sklearn.metrics import average_precision_score, roc_auc_score, roc_curve
from torch import nn

from svd_rnd import config
from svd_rnd.errors import InputValidationError
from svd_rnd.models import EvalReport, SelectionMetric
from svd_rnd.services import data_io
from svd_rnd.services.format_utils import format_metric
from svd_rnd.services.nn_core import Network, extract_features

logger = logging.getLogger(__name__)

TPR_LEVEL = 0.95

# Linear probe recipes
PROBE_ADAM_LR = 1e-3
PROBE_ADAM_EPOCHS = 50
PROBE_SGD_LR = 0.1
PROBE_SGD_EPOCHS = 100
PROBE_SGD_MILESTONES = (30, 60)
PROBE_BATCH_SIZE = 128


def _scores(in_scores, ood_scores) -> tuple[np.ndarray, np.ndarray]:
    in_scores = np.asarray(in_scores, dtype=np.float64).ravel()
    ood_scores = np.asarray(ood_scores, dtype=np.float64).ravel()
    if in_scores.size == 0 or ood_scores.size == 0:
        raise InputValidationError("both in-distribution and OOD scores must be non-empty")
    if not (np.all(np.isfinite(in_scores)) and np.all(np.isfinite(ood_scores))):
        raise InputValidationError("scores must be finite")
    return in_scores, ood_scores


def _labelled(in_scores: np.ndarray, ood_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated scores with OOD labelled 1."""
    labels = np.concatenate([np.zeros(in_scores.size), np.ones(ood_scores.size)])
    return labels, np.concatenate([in_scores, ood_scores])


def _unit(value: float) -> float:
    return float(min(max(value, 0.0), 1.0))


def auroc(in_scores, ood_scores) -> float:
    """P(ood score > in score) + 1/2 P(tie)."""
    in_scores, ood_scores = _scores(in_scores, ood_scores)
    labels, scores = _labelled(in_scores, ood_scores)
    return _unit(roc_auc_score(labels, scores))


def aupr(in_scores, ood_scores, positive: str = "out") -> float:
    """Average precision with in-distribution (``"in"``) or OOD (``"out"``) as positive.

    AUPR-in ranks by negated uncertainty so that low uncertainty is a positive detection.
    """
    in_scores, ood_scores = _scores(in_scores, ood_scores)
    labels, scores = _labelled(in_scores, ood_scores)
    if positive == "in":
        return _unit(average_precision_score(1 - labels, -scores))
    if positive == "out":
        return _unit(average_precision_score(labels, scores))
    raise InputValidationError(f"positive must be 'in' or 'out', got {positive!r}")


def tnr_at_tpr(in_scores, ood_scores, tpr_level: float = TPR_LEVEL) -> float:
    """Fraction of OOD scores above the smallest threshold accepting ``tpr_level`` of in-data."""
    in_scores, ood_scores = _scores(in_scores, ood_scores)
    if not 0 < tpr_level <= 1:
        raise InputValidationError(f"tpr_level must lie in (0, 1], got {tpr_level}")
    needed = math.ceil(tpr_level * in_scores.size - 1e-9)
    threshold = np.sort(in_scores, kind="stable")[max(needed, 1) - 1]
    return _unit(np.mean(ood_scores > threshold))


def detection_accuracy(in_scores, ood_scores) -> float:
    """Best balanced accuracy 1/2 (TPR + TNR) over all thresholds."""
    in_scores, ood_scores = _scores(in_scores, ood_scores)
    labels, scores = _labelled(in_scores, ood_scores)
    fpr, tpr, _ = roc_curve(labels, scores, drop_intermediate=False)
    return _unit(np.max(0.5 * (1.0 - fpr + tpr)))


def evaluate(in_scores, ood_scores, ood_name: str | None = None) -> EvalReport:
    """All five metrics for one (in, OOD) pair."""
    in_scores, ood_scores = _scores(in_scores, ood_scores)
    return EvalReport(
        auroc=auroc(in_scores, ood_scores),
        aupr_in=aupr(in_scores, ood_scores, positive="in"),
        aupr_out=aupr(in_scores, ood_scores, positive="out"),
        detection_accuracy=detection_accuracy(in_scores, ood_scores),
        tnr_at_95tpr=tnr_at_tpr(in_scores, ood_scores),
        in_count=in_scores.size,
        ood_count=ood_scores.size,
        ood_name=ood_name,
    )


TABLE_COLUMNS = (
    SelectionMetric.TNR_AT_95TPR,
    SelectionMetric.AUROC,
    SelectionMetric.DETECTION_ACCURACY,
    SelectionMetric.AUPR_IN,
    SelectionMetric.AUPR_OUT,
)


def format_table_row(label: str, reports: Sequence[EvalReport]) -> str:
    """One row: label then one column per metric, OOD sets slash-separated, in percent.

    Example:
        "SVD-RND | 96.9/98.0 | 99.2/99.6 | ..."
    """
    if not reports:
        raise InputValidationError("format_table_row needs at least one report")
    cells = ["/".join(format_metric(r.metric(m)) for r in reports) for m in TABLE_COLUMNS]
    return " | ".join([label, *cells])


def table_header(ood_names: Sequence[str]) -> str:
    names = "/".join(ood_names)
    return " | ".join(["Method", *(f"{m.value} ({names})" for m in TABLE_COLUMNS)])


# =============================================================================
# Linear probe
# =============================================================================


def collect_features(network: Network, images, depth: int) -> np.ndarray:
    """Batched ``extract_features`` over a whole dataset."""
    images = np.asarray(images, dtype=np.float32)
    batch_size = max(1, config.SCORE_BATCH_SIZE)
    parts = [
        extract_features(network, images[start : start + batch_size], depth)
        for start in range(0, len(images), batch_size)
    ]
    return np.concatenate(parts)


def linear_probe(
    features,
    labels,
    train_fraction: float = 0.8,
    seed: int = 0,
    schedule: str = "adam",
) -> float:
    """Held-out accuracy of a softmax linear classifier on fixed features.

    ``schedule="adam"`` trains with Adam (lr 1e-3, 50 epochs);
    ``schedule="sgd"`` uses SGD with momentum 0.9, lr 0.1 divided by 10
    after epochs 30 and 60 of 100. Features are standardized with the
    train-split statistics.

    Raises:
        InputValidationError: On shape mismatches, fewer than two classes or an empty split.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if features.ndim != 2 or len(features) != len(labels):
        raise InputValidationError(
            f"features {features.shape} and labels {labels.shape} do not align"
        )
    classes, targets = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise InputValidationError("linear probe needs at least two classes")
    if schedule not in ("adam", "sgd"):
        raise InputValidationError(f"unknown probe schedule {schedule!r}")

    (train_idx,) = data_io.split_indices(len(features), [train_fraction], seed)
    test_mask = np.ones(len(features), dtype=bool)
    test_mask[train_idx] = False
    if not test_mask.any():
        raise InputValidationError("linear probe has an empty held-out split")

    mean = features[train_idx].mean(axis=0)
    std = features[train_idx].std(axis=0)
    scaled = (features - mean) / np.where(std > 1e-12, std, 1.0)
    x_train = torch.as_tensor(scaled[train_idx], dtype=torch.float32)
    y_train = torch.as_tensor(targets[train_idx], dtype=torch.int64)
    x_test = torch.as_tensor(scaled[test_mask], dtype=torch.float32)
    y_test = torch.as_tensor(targets[test_mask], dtype=torch.int64)

    head = nn.Linear(features.shape[1], len(classes))
    with torch.no_grad():
        head.weight.zero_()
        head.bias.zero_()
    if schedule == "adam":
        optimizer = torch.optim.Adam(head.parameters(), lr=PROBE_ADAM_LR)
        scheduler = None
        epochs = PROBE_ADAM_EPOCHS
    else:
        optimizer = torch.optim.SGD(head.parameters(), lr=PROBE_SGD_LR, momentum=0.9)
        scheduler = torch.optim.lr_scheduler.MultiStepLR(
            optimizer, milestones=list(PROBE_SGD_MILESTONES), gamma=0.1
        )
        epochs = PROBE_SGD_EPOCHS

    rng = np.random.default_rng(seed)
    loss_fn = nn.CrossEntropyLoss()
    for _ in range(epochs):
        order = torch.as_tensor(rng.permutation(len(x_train)))
        for start in range(0, len(order), PROBE_BATCH_SIZE):
            batch = order[start : start + PROBE_BATCH_SIZE]
            optimizer.zero_grad()
            loss = loss_fn(head(x_train[batch]), y_train[batch])
            loss.backward()
            optimizer.step()
        if scheduler is not None:
            scheduler.step()

    with torch.no_grad():
        predictions = head(x_test).argmax(dim=1)
    accuracy = float((predictions == y_test).double().mean())
    logger.info(
        f"Linear probe ({schedule}): {accuracy:.4f} on {len(y_test)} held-out samples, "
        f"{len(classes)} classes"
    )
    return accuracy
