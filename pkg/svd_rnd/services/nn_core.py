"""Predictor/target networks on torch: profiles, seeded init, loss gradients and Adam.

Networks are plain ``nn.Sequential`` stacks built from a ``NetworkProfile``.
No batch normalization is used anywhere, so every sample's output depends
only on that sample and the parameters.
"""

import copy
import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from pydantic import ValidationError
from torch import nn

from svd_rnd.errors import InputValidationError, NumericalError
from svd_rnd.models import LayerKind, LayerSpec, NetworkProfile, ProfileName

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# ResNet34 stage layout used by the resnet34 profile
_RESNET34_STAGES = ((64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2))


# =============================================================================
# Profiles
# =============================================================================


def tiny_target_profile(
    input_shape: tuple[int, int, int] = (3, 32, 32),
    widths: tuple[int, int, int] = (32, 64, 64),
    feature_dim: int = 128,
) -> NetworkProfile:
    """Three stride-2 conv + leaky-ReLU stages, flatten, dense to ``feature_dim``."""
    return NetworkProfile(
        name=ProfileName.TINY,
        input_shape=input_shape,
        layers=_tiny_layers(input_shape, widths, feature_dim),
        output_dim=feature_dim,
    )


def tiny_predictor_profile(
    input_shape: tuple[int, int, int] = (3, 32, 32),
    widths: tuple[int, int, int] = (32, 64, 64),
    feature_dim: int = 128,
    hidden: int = 256,
) -> NetworkProfile:
    """The target stack plus dense(feature_dim -> hidden), ReLU, dense(hidden -> feature_dim)."""
    layers = _tiny_layers(input_shape, widths, feature_dim) + [
        LayerSpec(kind=LayerKind.DENSE, in_features=feature_dim, out_features=hidden),
        LayerSpec(kind=LayerKind.RELU),
        LayerSpec(kind=LayerKind.DENSE, in_features=hidden, out_features=feature_dim),
    ]
    return NetworkProfile(
        name=ProfileName.TINY, input_shape=input_shape, layers=layers, output_dim=feature_dim
    )


def _tiny_layers(
    input_shape: tuple[int, int, int], widths: tuple[int, int, int], feature_dim: int
) -> list[LayerSpec]:
    channels, height, width = input_shape
    layers: list[LayerSpec] = []
    for out_channels in widths:
        layers.append(
            LayerSpec(
                kind=LayerKind.CONV, in_channels=channels, out_channels=out_channels, stride=2
            )
        )
        layers.append(LayerSpec(kind=LayerKind.LEAKY_RELU, slope=0.01))
        channels = out_channels
        height, width = (height + 1) // 2, (width + 1) // 2
    layers.append(LayerSpec(kind=LayerKind.FLATTEN))
    layers.append(
        LayerSpec(
            kind=LayerKind.DENSE, in_features=channels * height * width, out_features=feature_dim
        )
    )
    return layers


def _resnet_layers(input_shape: tuple[int, int, int], extension: bool) -> tuple[list, int]:
    channels, height, width = input_shape
    layers = [
        LayerSpec(kind=LayerKind.CONV, in_channels=channels, out_channels=64, kernel=7, stride=2),
        LayerSpec(kind=LayerKind.RELU),
    ]
    height, width = (height + 1) // 2, (width + 1) // 2
    channels = 64
    for out_channels, blocks, stride in _RESNET34_STAGES:
        for block in range(blocks):
            block_stride = stride if block == 0 else 1
            layers.append(
                LayerSpec(
                    kind=LayerKind.RESIDUAL,
                    in_channels=channels,
                    out_channels=out_channels,
                    stride=block_stride,
                )
            )
            channels = out_channels
            if block_stride == 2:
                height, width = (height + 1) // 2, (width + 1) // 2
    if extension:
        layers.append(LayerSpec(kind=LayerKind.RESIDUAL, in_channels=512, out_channels=1024))
        layers.append(LayerSpec(kind=LayerKind.RESIDUAL, in_channels=1024, out_channels=512))
    # Last block ends without an activation
    layers[-1] = layers[-1].model_copy(update={"activation": False})
    layers.append(LayerSpec(kind=LayerKind.FLATTEN))
    return layers, 512 * height * width


def resnet34_target_profile(input_shape: tuple[int, int, int] = (3, 32, 32)) -> NetworkProfile:
    """Stem conv plus the 16 ResNet34 residual blocks (33 conv layers), flattened.

    Descriptive only: there is no batch normalization or max pooling, and the
    feature width is fixed by the input size.
    """
    layers, output_dim = _resnet_layers(input_shape, extension=False)
    return NetworkProfile(
        name=ProfileName.RESNET34, input_shape=input_shape, layers=layers, output_dim=output_dim
    )


def resnet34_predictor_profile(input_shape: tuple[int, int, int] = (3, 32, 32)) -> NetworkProfile:
    """The resnet34 target with two extra residual blocks of widths 1024 and 512."""
    layers, output_dim = _resnet_layers(input_shape, extension=True)
    return NetworkProfile(
        name=ProfileName.RESNET34, input_shape=input_shape, layers=layers, output_dim=output_dim
    )


def build_profiles(
    name: ProfileName, input_shape: tuple[int, int, int], feature_dim: int = 128
) -> tuple[NetworkProfile, NetworkProfile]:
    """Return (predictor profile, target profile) for a named family."""
    if ProfileName(name) == ProfileName.RESNET34:
        return resnet34_predictor_profile(input_shape), resnet34_target_profile(input_shape)
    return (
        tiny_predictor_profile(input_shape, feature_dim=feature_dim),
        tiny_target_profile(input_shape, feature_dim=feature_dim),
    )


# =============================================================================
# Modules
# =============================================================================


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with an identity or 1x1 projection shortcut."""

    def __init__(self, in_channels: int, out_channels: int, stride: int, activation: bool):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.shortcut = None
        if in_channels != out_channels or stride != 1:
            self.shortcut = nn.Conv2d(in_channels, out_channels, 1, stride=stride)
        self.activation = activation

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.conv2(torch.relu(self.conv1(x)))
        out = out + (x if self.shortcut is None else self.shortcut(x))
        return torch.relu(out) if self.activation else out


def _build_layer(spec: LayerSpec) -> nn.Module:
    if spec.kind == LayerKind.CONV:
        return nn.Conv2d(
            spec.in_channels,
            spec.out_channels,
            spec.kernel,
            stride=spec.stride,
            padding=spec.kernel // 2,
        )
    if spec.kind == LayerKind.DENSE:
        return nn.Linear(spec.in_features, spec.out_features)
    if spec.kind == LayerKind.FLATTEN:
        return nn.Flatten()
    if spec.kind == LayerKind.LEAKY_RELU:
        return nn.LeakyReLU(spec.slope)
    if spec.kind == LayerKind.RELU:
        return nn.ReLU()
    return ResidualBlock(spec.in_channels, spec.out_channels, spec.stride, spec.activation)


# =============================================================================
# Networks
# =============================================================================


@dataclass
class Network:
    """A profile, its seed and the torch module holding the parameters."""

    profile: NetworkProfile
    seed: int
    frozen: bool
    module: nn.Sequential

    @property
    def dtype(self) -> torch.dtype:
        return next(self.module.parameters()).dtype

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def parameter_vector(self) -> np.ndarray:
        """Flat copy of all parameters in module order."""
        with torch.no_grad():
            return nn.utils.parameters_to_vector(self.module.parameters()).cpu().numpy().copy()

    def load_parameter_vector(self, vector: np.ndarray) -> None:
        """Overwrite all parameters from a flat vector.

        Raises:
            InputValidationError: On a length mismatch.
        """
        vector = np.asarray(vector)
        if vector.shape != (self.parameter_count,):
            raise InputValidationError(
                f"parameter vector has shape {vector.shape}, expected ({self.parameter_count},)"
            )
        with torch.no_grad():
            nn.utils.vector_to_parameters(
                torch.as_tensor(vector, dtype=self.dtype), self.module.parameters()
            )

    def fingerprint(self) -> str:
        """sha256 of the parameter bytes."""
        return hashlib.sha256(self.parameter_vector().tobytes()).hexdigest()

    def copy(self, frozen: bool | None = None) -> "Network":
        """Deep copy, optionally changing the frozen flag."""
        frozen = self.frozen if frozen is None else frozen
        module = copy.deepcopy(self.module)
        module.requires_grad_(not frozen)
        return Network(profile=self.profile, seed=self.seed, frozen=frozen, module=module)


def init_network(
    profile: NetworkProfile | dict,
    seed: int,
    frozen: bool = False,
    dtype: torch.dtype = torch.float32,
) -> Network:
    """Build a network with He-style Gaussian weights and zero biases.

    Weights are drawn in module order from a generator seeded with ``seed``,
    with variance 2 / fan_in per layer.

    Raises:
        InputValidationError: If the profile is malformed.
    """
    if not isinstance(profile, NetworkProfile):
        try:
            profile = NetworkProfile.model_validate(profile)
        except ValidationError as e:
            raise InputValidationError(f"malformed network profile: {e}") from e

    module = nn.Sequential(*(_build_layer(spec) for spec in profile.layers)).to(dtype)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in module.modules():
            if isinstance(layer, (nn.Conv2d, nn.Linear)):
                fan_in = layer.weight[0].numel()
                weights = torch.randn(layer.weight.shape, generator=generator, dtype=dtype)
                layer.weight.copy_(weights * math.sqrt(2.0 / fan_in))
                layer.bias.zero_()
    module.requires_grad_(not frozen)
    module.eval()
    return Network(profile=profile, seed=seed, frozen=frozen, module=module)


def _as_batch(network: Network, images) -> torch.Tensor:
    if isinstance(images, torch.Tensor):
        batch = images.to(network.dtype)
    else:
        batch = torch.as_tensor(np.asarray(images), dtype=network.dtype)
    expected = tuple(network.profile.input_shape)
    if batch.ndim != 4 or tuple(batch.shape[1:]) != expected:
        raise InputValidationError(
            f"input batch has shape {tuple(batch.shape)}, expected (N, *{expected})"
        )
    return batch


def forward(network: Network, images) -> np.ndarray:
    """Feature matrix (N, output_dim) for a batch (N, C, H, W).

    Raises:
        InputValidationError: If the batch shape does not match the profile.
    """
    batch = _as_batch(network, images)
    with torch.no_grad():
        return network.module(batch).cpu().numpy()


def extract_features(network: Network, images, depth: int) -> np.ndarray:
    """Flattened activations after the first ``depth`` layers of a network."""
    if not 1 <= depth <= len(network.module):
        raise InputValidationError(f"depth must be in [1, {len(network.module)}], got {depth}")
    batch = _as_batch(network, images)
    with torch.no_grad():
        return network.module[:depth](batch).flatten(1).cpu().numpy()


def _check_pair(predictor: Network, target: Network) -> None:
    if predictor.frozen:
        raise InputValidationError("predictor must be trainable")
    if predictor.profile.output_dim != target.profile.output_dim:
        raise InputValidationError(
            f"output_dim mismatch: predictor {predictor.profile.output_dim}, "
            f"target {target.profile.output_dim}"
        )


def pair_loss(predictor: Network, target: Network, batch: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of ||f(x) - g(x)||^2, differentiable in the predictor only."""
    with torch.no_grad():
        goal = target.module(batch.to(target.dtype)).to(predictor.dtype)
    return (predictor.module(batch) - goal).pow(2).sum(dim=1).mean()


def loss_and_grad(predictor: Network, target: Network, images) -> tuple[float, np.ndarray]:
    """Distillation loss and its gradient with respect to the predictor parameters.

    Returns:
        (loss, flat gradient vector in ``parameter_vector`` order)

    Raises:
        InputValidationError: On a frozen predictor, output_dim mismatch or bad shape.
    """
    _check_pair(predictor, target)
    batch = _as_batch(predictor, images)
    loss = pair_loss(predictor, target, batch)
    grads = torch.autograd.grad(loss, list(predictor.module.parameters()))
    flat = torch.cat([g.reshape(-1) for g in grads])
    return float(loss.detach()), flat.cpu().numpy()


# =============================================================================
# Adam
# =============================================================================


class AdamState:
    """Bias-corrected Adam moments for one network (beta1 0.9, beta2 0.999, eps 1e-8)."""

    def __init__(self, network: Network, lr: float = 1e-4):
        if network.frozen:
            raise InputValidationError("cannot optimize a frozen network")
        self._params = list(network.module.parameters())
        self.optimizer = torch.optim.Adam(self._params, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)

    def owns(self, network: Network) -> bool:
        params = list(network.module.parameters())
        return len(params) == len(self._params) and all(
            a is b for a, b in zip(params, self._params)
        )

    @property
    def step(self) -> int:
        states = [self.optimizer.state.get(p, {}) for p in self._params]
        return int(states[0]["step"]) if states and "step" in states[0] else 0

    def _moment(self, key: str) -> np.ndarray:
        parts = []
        for p in self._params:
            state = self.optimizer.state.get(p, {})
            value = state.get(key, torch.zeros_like(p))
            parts.append(value.detach().reshape(-1))
        return torch.cat(parts).cpu().numpy()

    @property
    def first_moment(self) -> np.ndarray:
        return self._moment("exp_avg")

    @property
    def second_moment(self) -> np.ndarray:
        return self._moment("exp_avg_sq")

    def apply(self, grads: list[torch.Tensor], lr: float) -> None:
        """Run one update with per-parameter gradients.

        Raises:
            NumericalError: If any gradient is non-finite.
        """
        for index, grad in enumerate(grads):
            if not torch.all(torch.isfinite(grad)):
                raise NumericalError(
                    f"non-finite gradient in parameter tensor {index}", step=self.step + 1
                )
        for param, grad in zip(self._params, grads):
            param.grad = grad.detach().clone()
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.optimizer.step()
        self.optimizer.zero_grad(set_to_none=True)


def adam_step(network: Network, grads: np.ndarray, state: AdamState, lr: float) -> None:
    """Apply one Adam update from a flat gradient vector, in place.

    Raises:
        InputValidationError: If shapes disagree or the state belongs to another network.
        NumericalError: If the gradient has non-finite entries.
    """
    if not state.owns(network):
        raise InputValidationError("Adam state was created for a different network")
    grads = np.asarray(grads)
    if grads.shape != (network.parameter_count,):
        raise InputValidationError(
            f"gradient has shape {grads.shape}, expected ({network.parameter_count},)"
        )
    flat = torch.as_tensor(grads, dtype=network.dtype)
    pieces = []
    offset = 0
    for param in network.module.parameters():
        pieces.append(flat[offset : offset + param.numel()].view_as(param))
        offset += param.numel()
    state.apply(pieces, lr)
