"""
Feed-forward network model: dense layers, 2-D convolutions and activations.

Flattening order between spatial and flat layers is channel-major, then
row, then column (C-order of a ``(channels, height, width)`` array).
"""

from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from lipbound.domain.enums import ActivationKind
from lipbound.domain.errors import ShapeError
from lipbound.domain.models.base import ArrayModel, frozen_array


class InputDims(BaseModel):
    """Tensor dimensions (channels × height × width)."""

    model_config = ConfigDict(frozen=True)

    channels: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    width: int = Field(..., ge=1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width

    def __str__(self) -> str:
        return f"{self.channels}x{self.height}x{self.width}"


class DenseLayer(ArrayModel):
    """Affine layer ``W x + b`` with W of shape (out_dim × in_dim)."""

    weights: np.ndarray
    bias: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def validate_weights(cls, v):
        return frozen_array(v, 2, "dense weights")

    @field_validator("bias", mode="before")
    @classmethod
    def validate_bias(cls, v):
        return frozen_array(v, 1, "dense bias")

    @model_validator(mode="after")
    def check_bias_length(self) -> "DenseLayer":
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"dense bias length {self.bias.shape[0]} != out_dim {self.weights.shape[0]}"
            )
        return self

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


class ConvLayer(ArrayModel):
    """2-D convolution (cross-correlation) with zero padding and stride."""

    kernel: np.ndarray  # [out_channels, in_channels, k_h, k_w]
    bias: np.ndarray
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)

    @field_validator("kernel", mode="before")
    @classmethod
    def validate_kernel(cls, v):
        return frozen_array(v, 4, "conv kernel")

    @field_validator("bias", mode="before")
    @classmethod
    def validate_bias(cls, v):
        return frozen_array(v, 1, "conv bias")

    @field_validator("stride")
    @classmethod
    def validate_stride(cls, v: tuple[int, int]) -> tuple[int, int]:
        if min(v) < 1:
            raise ShapeError(f"conv stride must be >= 1, got {v}")
        return v

    @field_validator("padding")
    @classmethod
    def validate_padding(cls, v: tuple[int, int]) -> tuple[int, int]:
        if min(v) < 0:
            raise ShapeError(f"conv padding must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def check_bias_length(self) -> "ConvLayer":
        if self.bias.shape[0] != self.kernel.shape[0]:
            raise ShapeError(
                f"conv bias length {self.bias.shape[0]} != out_channels {self.kernel.shape[0]}"
            )
        return self

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def kernel_size(self) -> tuple[int, int]:
        return (self.kernel.shape[2], self.kernel.shape[3])

    def output_dims(self, dims: InputDims) -> InputDims:
        """
        Output dimensions for an input of ``dims``.

        O = floor((I - K + 2p) / S) + 1 per spatial axis.

        Raises:
            ShapeError: On channel mismatch or a kernel larger than the padded input
        """
        if dims.channels != self.in_channels:
            raise ShapeError(
                f"conv expects {self.in_channels} input channels, got {dims.channels}"
            )
        kh, kw = self.kernel_size
        (sy, sx), (ph, pw) = self.stride, self.padding
        padded_h, padded_w = dims.height + 2 * ph, dims.width + 2 * pw
        if kh > padded_h or kw > padded_w:
            raise ShapeError(
                f"kernel {kh}x{kw} larger than padded input {padded_h}x{padded_w}"
            )
        return InputDims(
            channels=self.out_channels,
            height=(padded_h - kh) // sy + 1,
            width=(padded_w - kw) // sx + 1,
        )


class ActivationLayer(BaseModel):
    """Element-wise activation (LogSoftmax acts on the flattened vector)."""

    model_config = ConfigDict(frozen=True)

    kind: ActivationKind


Layer = Union[DenseLayer, ConvLayer, ActivationLayer]

# Shape flowing between layers: spatial dims or a flat width
Shape = Union[InputDims, int]


def flat_size(shape: Shape) -> int:
    """Number of scalars in a layer input/output."""
    return shape.size if isinstance(shape, InputDims) else shape


class Network(ArrayModel):
    """Ordered stack of layers applied to inputs of ``input_dims``."""

    input_dims: InputDims
    layers: tuple[Layer, ...]

    @field_validator("layers", mode="before")
    @classmethod
    def coerce_layers(cls, v):
        return tuple(v)

    @model_validator(mode="after")
    def check_composition(self) -> "Network":
        if not self.layers:
            raise ShapeError("network must contain at least one layer")
        self.layer_shapes()
        return self

    def layer_shapes(self) -> list[tuple[Shape, Shape]]:
        """
        Input and output shape of every layer, in order.

        Raises:
            ShapeError: If consecutive layers do not compose
        """
        shapes: list[tuple[Shape, Shape]] = []
        current: Shape = self.input_dims
        for index, layer in enumerate(self.layers):
            if isinstance(layer, DenseLayer):
                if layer.in_dim != flat_size(current):
                    raise ShapeError(
                        f"layer {index}: dense in_dim {layer.in_dim} != "
                        f"incoming size {flat_size(current)}"
                    )
                out: Shape = layer.out_dim
            elif isinstance(layer, ConvLayer):
                if not isinstance(current, InputDims):
                    raise ShapeError(f"layer {index}: conv layer cannot follow a flat layer")
                try:
                    out = layer.output_dims(current)
                except ShapeError as e:
                    raise ShapeError(f"layer {index}: {e}") from e
            elif layer.kind == ActivationKind.LOG_SOFTMAX:
                out = flat_size(current)
            else:
                out = current
            shapes.append((current, out))
            current = out
        return shapes

    @property
    def output_size(self) -> int:
        return flat_size(self.layer_shapes()[-1][1])

    @property
    def has_trailing_log_softmax(self) -> bool:
        last = self.layers[-1]
        return isinstance(last, ActivationLayer) and last.kind == ActivationKind.LOG_SOFTMAX

    def with_layers(self, layers) -> "Network":
        """Copy with a replaced layer stack."""
        return Network(input_dims=self.input_dims, layers=tuple(layers))
