"""Multi-target distillation training: one predictor against b_train + 1 frozen targets.

Target g_0 pairs with the original data and g_i with the i-th auxiliary
dataset. Each round draws one mini-batch per dataset in order 0..b_train and
applies one Adam update per batch.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from svd_rnd import config as settings
from svd_rnd.errors import ContainerFormatError, InputValidationError, NumericalError
from svd_rnd.models import NetworkProfile, StepLogEntry, TrainConfig
from svd_rnd.services import data_io
from svd_rnd.services.degradations import build_aux_datasets
from svd_rnd.services.nn_core import AdamState, Network, build_profiles, init_network, pair_loss

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "svd-rnd-checkpoint"

# Parameter updates of a plain run (b_train = 0) under the default schedule
_BASE_EPOCHS = 100


@dataclass
class RndModel:
    """Trained predictor, its frozen targets and the train-set mean uncertainty."""

    predictor: Network
    targets: list[Network]
    train_loss_mean: float | None
    config: TrainConfig
    config_fingerprint: str
    step_log: list[StepLogEntry] = field(default_factory=list)
    train_indices: np.ndarray | None = None

    def __post_init__(self):
        if not self.targets:
            raise InputValidationError("an RND model needs at least one target network")
        for index, target in enumerate(self.targets):
            if not target.frozen:
                raise InputValidationError(f"target g_{index} is not frozen")
            if target.profile.output_dim != self.predictor.profile.output_dim:
                raise InputValidationError(f"target g_{index} output_dim differs from predictor")

    @property
    def b_train(self) -> int:
        return len(self.targets) - 1

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return tuple(self.predictor.profile.input_shape)


# =============================================================================
# Schedule
# =============================================================================


def default_epochs(train_count: int, aux_counts: list[int]) -> int:
    """Epochs keeping the update count fixed: ceil(100 / (1 + sum(|D_i|) / |D_train|))."""
    if train_count < 1:
        raise InputValidationError("training set is empty")
    return math.ceil(_BASE_EPOCHS / (1 + sum(aux_counts) / train_count))


def learning_rate(epoch: int, epochs: int, base_lr: float, annealed_lr: float) -> float:
    """base_lr for 0-based epochs before ceil(epochs / 2), annealed_lr from there on."""
    return base_lr if epoch < math.ceil(epochs / 2) else annealed_lr


def derive_seeds(seed: int, b_train: int) -> tuple[int, list[int], np.random.SeedSequence]:
    """Independent seeds for the predictor, each target and batch shuffling."""
    predictor_seq, target_seq, data_seq = np.random.SeedSequence(seed).spawn(3)
    predictor_seed = int(predictor_seq.generate_state(1)[0])
    target_seeds = [int(s) for s in target_seq.generate_state(b_train + 1)]
    return predictor_seed, target_seeds, data_seq


class _BatchCycler:
    """Endless mini-batches over one dataset, reshuffled on every pass."""

    def __init__(self, data: torch.Tensor, batch_size: int, rng: np.random.Generator):
        self.data = data
        self.batch_size = batch_size
        self.rng = rng
        self._order = np.empty(0, dtype=np.int64)
        self._position = 0

    def next(self) -> torch.Tensor:
        if self._position >= len(self._order):
            self._order = self.rng.permutation(len(self.data))
            self._position = 0
        indices = self._order[self._position : self._position + self.batch_size]
        self._position += self.batch_size
        return self.data[torch.as_tensor(indices)]


# =============================================================================
# Training
# =============================================================================


def _as_stack(images) -> np.ndarray:
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4 or len(images) == 0:
        raise InputValidationError(
            f"training set must be a non-empty (N, C, H, W) stack, got {images.shape}"
        )
    if not np.all(np.isfinite(images)):
        raise InputValidationError("training set contains non-finite values")
    return images


def mean_uncertainty(predictor: Network, target: Network, images: np.ndarray) -> float:
    """Mean ||f(x) - g(x)||^2 over a dataset, batched."""
    total = 0.0
    batch_size = max(1, settings.SCORE_BATCH_SIZE)
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            batch = torch.as_tensor(images[start : start + batch_size], dtype=predictor.dtype)
            total += float(pair_loss(predictor, target, batch)) * len(batch)
    return total / len(images)


def train(
    train_images,
    train_config: TrainConfig,
    aux_datasets: list[np.ndarray] | None = None,
) -> RndModel:
    """Fit a predictor to g_0 on the training set and g_i on each auxiliary set.

    Args:
        train_images: (N, C, H, W) training stack.
        train_config: Schedule and degradations.
        aux_datasets: Prebuilt auxiliary sets; derived from the config's
            degradations when omitted.

    Returns:
        RndModel with the train-set mean uncertainty recorded.

    Raises:
        InputValidationError: On an empty set or inconsistent auxiliary sets.
        NumericalError: If the loss becomes non-finite, naming the step.
    """
    images = _as_stack(train_images)
    indices = data_io.subsample(
        np.arange(len(images)),
        train_config.train_fraction,
        train_config.seed,
        min_count=min(train_config.batch_size, len(images)),
    )
    if train_config.train_fraction < 1.0:
        images = images[indices]
        if aux_datasets is not None:
            raise InputValidationError(
                "prebuilt auxiliary sets cannot be combined with train_fraction < 1"
            )

    if aux_datasets is None:
        aux_datasets = []
        if train_config.b_train:
            aux_datasets = build_aux_datasets(images, train_config.degradations)
    if len(aux_datasets) != train_config.b_train:
        raise InputValidationError(
            f"b_train={train_config.b_train} but {len(aux_datasets)} auxiliary sets given"
        )
    aux_datasets = [_as_stack(a) for a in aux_datasets]
    for index, aux in enumerate(aux_datasets, start=1):
        if aux.shape[1:] != images.shape[1:]:
            raise InputValidationError(f"auxiliary set {index} has image shape {aux.shape[1:]}")

    input_shape = tuple(images.shape[1:])
    predictor_profile, target_profile = build_profiles(
        train_config.profile, input_shape, train_config.feature_dim
    )
    predictor_seed, target_seeds, data_seq = derive_seeds(train_config.seed, train_config.b_train)
    predictor = init_network(predictor_profile, predictor_seed)
    predictor.module.train()
    targets = [init_network(target_profile, s, frozen=True) for s in target_seeds]

    batch_size = min(train_config.batch_size, len(images))
    rounds_per_epoch = math.ceil(len(images) / batch_size)
    if train_config.total_updates is not None:
        updates_per_epoch = rounds_per_epoch * (train_config.b_train + 1)
        epochs = math.ceil(train_config.total_updates / updates_per_epoch)
    elif train_config.epochs is not None:
        epochs = train_config.epochs
    else:
        epochs = default_epochs(len(images), [len(a) for a in aux_datasets])

    datasets = [images] + aux_datasets
    rngs = [np.random.default_rng(s) for s in data_seq.spawn(len(datasets))]
    cyclers = [
        _BatchCycler(torch.tensor(d), batch_size, rng) for d, rng in zip(datasets, rngs)
    ]

    logger.info(
        f"Training b_train={train_config.b_train} on {len(images)} images: "
        f"{epochs} epochs x {rounds_per_epoch} rounds, batch {batch_size}"
    )
    state = AdamState(predictor, lr=train_config.base_lr)
    params = list(predictor.module.parameters())
    step_log: list[StepLogEntry] = []
    step = 0
    for epoch in range(epochs):
        lr = learning_rate(epoch, epochs, train_config.base_lr, train_config.annealed_lr)
        epoch_losses = []
        for _ in range(rounds_per_epoch):
            for dataset_index, (cycler, target) in enumerate(zip(cyclers, targets)):
                if train_config.total_updates is not None and step >= train_config.total_updates:
                    break
                step += 1
                loss = pair_loss(predictor, target, cycler.next())
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise NumericalError(f"loss diverged on dataset {dataset_index}", step=step)
                grads = torch.autograd.grad(loss, params)
                state.apply(list(grads), lr)
                step_log.append(
                    StepLogEntry(step=step, dataset_index=dataset_index, loss=value, lr=lr)
                )
                if dataset_index == 0:
                    epoch_losses.append(value)
        if epoch_losses:
            logger.info(
                f"Epoch {epoch + 1}/{epochs}: lr={lr:g} train loss {np.mean(epoch_losses):.6f}"
            )

    predictor.module.eval()
    mu = mean_uncertainty(predictor, targets[0], images)
    if not math.isfinite(mu):
        raise NumericalError("mean training loss is non-finite", step=step)
    logger.info(f"✅ Training done after {step} updates, mean train loss {mu:.6f}")
    return RndModel(
        predictor=predictor,
        targets=targets,
        train_loss_mean=mu,
        config=train_config,
        config_fingerprint=train_config.fingerprint(),
        step_log=step_log,
        train_indices=indices,
    )


def reduced_data_sweep(
    train_images, train_config: TrainConfig, fractions: list[float]
) -> list[RndModel]:
    """Train one model per training-set fraction.

    Subsets are prefixes of one permutation seeded by the config seed, so
    smaller fractions use subsets of larger ones.

    Raises:
        InputValidationError: If a fraction is outside (0, 1] or leaves less than one batch.
    """
    if not fractions or any(not 0 < f <= 1 for f in fractions):
        raise InputValidationError(f"fractions must lie in (0, 1], got {fractions}")
    models = []
    for fraction in fractions:
        logger.info(f"Reduced-data run: fraction {fraction}")
        reduced = train_config.model_copy(update={"train_fraction": fraction})
        models.append(train(train_images, reduced))
    return models


# =============================================================================
# Checkpoints and step logs
# =============================================================================


def save_checkpoint(model: RndModel, path: str | Path) -> Path:
    """Write a checkpoint: JSON header container, then predictor and target parameter vectors."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "b_train": model.b_train,
        "config": model.config.model_dump(mode="json"),
        "config_fingerprint": model.config_fingerprint,
        "train_loss_mean": model.train_loss_mean,
        "predictor": {
            "profile": model.predictor.profile.model_dump(mode="json"),
            "seed": model.predictor.seed,
        },
        "targets": [
            {"profile": t.profile.model_dump(mode="json"), "seed": t.seed} for t in model.targets
        ],
    }
    header_json = json.dumps(header, sort_keys=True).encode("utf-8")
    header_bytes = np.frombuffer(header_json, dtype=np.uint8)
    vectors = [model.predictor.parameter_vector().astype(np.float32)]
    vectors += [t.parameter_vector().astype(np.float32) for t in model.targets]
    path = data_io.write_containers(path, [header_bytes] + vectors)
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: str | Path) -> RndModel:
    """Rebuild an RndModel from a checkpoint file.

    Raises:
        ContainerFormatError: If the file is not a well-formed checkpoint.
    """
    arrays = data_io.read_containers(path)
    try:
        header = json.loads(arrays[0].tobytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"{path}: checkpoint header is not JSON: {e}", offset=0) from e
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ContainerFormatError(f"{path}: not an svd-rnd checkpoint", offset=0)
    if len(arrays) != header["b_train"] + 3:
        raise ContainerFormatError(
            f"{path}: expected {header['b_train'] + 3} containers, found {len(arrays)}"
        )

    def restore(entry: dict, vector: np.ndarray, frozen: bool) -> Network:
        profile = NetworkProfile.model_validate(entry["profile"])
        network = init_network(profile, entry["seed"], frozen=frozen)
        network.load_parameter_vector(vector)
        return network

    predictor = restore(header["predictor"], arrays[1], frozen=False)
    targets = [restore(e, v, frozen=True) for e, v in zip(header["targets"], arrays[2:])]
    return RndModel(
        predictor=predictor,
        targets=targets,
        train_loss_mean=header["train_loss_mean"],
        config=TrainConfig.model_validate(header["config"]),
        config_fingerprint=header["config_fingerprint"],
    )


def write_step_log(entries: list[StepLogEntry], path: str | Path) -> Path:
    """Write the per-update log as CSV: step,dataset_index,loss,lr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "dataset_index", "loss", "lr"])
        for entry in entries:
            writer.writerow(
                [entry.step, entry.dataset_index, f"{entry.loss:.17g}", f"{entry.lr:g}"]
            )
    return path
