"""Pydantic models describing network architectures."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class LayerKind(str, Enum):
    """Layer types a profile may contain."""

    CONV = "conv"
    DENSE = "dense"
    FLATTEN = "flatten"
    LEAKY_RELU = "leaky_relu"
    RELU = "relu"
    RESIDUAL = "residual"


class ProfileName(str, Enum):
    """Named architecture families."""

    TINY = "tiny"
    RESNET34 = "resnet34"


_ACTIVATIONS = {LayerKind.LEAKY_RELU, LayerKind.RELU}


class LayerSpec(BaseModel):
    """One layer descriptor.

    conv and residual use ``in_channels``/``out_channels`` (residual blocks are
    two 3x3 convolutions with a 1x1 projection shortcut when shapes differ);
    dense uses ``in_features``/``out_features``.
    """

    model_config = ConfigDict(frozen=True)

    kind: LayerKind
    in_channels: int | None = Field(None, ge=1)
    out_channels: int | None = Field(None, ge=1)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    in_features: int | None = Field(None, ge=1)
    out_features: int | None = Field(None, ge=1)
    slope: float = Field(default=0.01, description="Negative slope for leaky_relu")
    activation: bool = Field(default=True, description="Residual block output activation")

    @model_validator(mode="after")
    def _check_fields(self) -> "LayerSpec":
        if self.kind in (LayerKind.CONV, LayerKind.RESIDUAL):
            if self.in_channels is None or self.out_channels is None:
                raise ValueError(f"{self.kind.value} layer needs in_channels and out_channels")
        if self.kind == LayerKind.DENSE:
            if self.in_features is None or self.out_features is None:
                raise ValueError("dense layer needs in_features and out_features")
        return self


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    """Spatial size after a 'same'-padded convolution."""
    padding = kernel // 2
    return (size + 2 * padding - kernel) // stride + 1


class NetworkProfile(BaseModel):
    """A full architecture: input shape, ordered layers and feature width."""

    model_config = ConfigDict(frozen=True)

    name: ProfileName = ProfileName.TINY
    input_shape: tuple[int, int, int] = Field(..., description="(C, H, W)")
    layers: list[LayerSpec]
    output_dim: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_composition(self) -> "NetworkProfile":
        if not self.layers:
            raise ValueError("profile has no layers")
        if self.layers[-1].kind in _ACTIVATIONS:
            raise ValueError("final layer must not be an activation")
        if self.layers[-1].kind == LayerKind.RESIDUAL and self.layers[-1].activation:
            raise ValueError("final residual block must not apply an activation")

        shape: tuple[int, ...] = tuple(self.input_shape)
        for index, layer in enumerate(self.layers):
            where = f"layer {index} ({layer.kind.value})"
            if layer.kind in (LayerKind.CONV, LayerKind.RESIDUAL):
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    raise ValueError(f"{where}: expects {layer.in_channels} channels, got {shape}")
                _, height, width = shape
                stride = layer.stride
                kernel = layer.kernel if layer.kind == LayerKind.CONV else 3
                shape = (
                    layer.out_channels,
                    conv_output_size(height, kernel, stride),
                    conv_output_size(width, kernel, stride),
                )
            elif layer.kind == LayerKind.FLATTEN:
                size = 1
                for dim in shape:
                    size *= dim
                shape = (size,)
            elif layer.kind == LayerKind.DENSE:
                if len(shape) != 1 or shape[0] != layer.in_features:
                    raise ValueError(f"{where}: expects {layer.in_features} features, got {shape}")
                shape = (layer.out_features,)

        if shape != (self.output_dim,):
            raise ValueError(f"profile produces shape {shape}, expected ({self.output_dim},)")
        return self
