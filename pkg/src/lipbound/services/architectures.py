"""
Named network architecture templates.

Templates carry zero weights; the trainer initializes them from a seed.
"""

from typing import Sequence

import numpy as np

from lipbound.domain.enums import ActivationKind
from lipbound.domain.errors import ConfigurationError
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Network,
)

NUM_CLASSES = 10

MLP_DEFAULT_HIDDEN = (256, 128)
MLP_SMALL_HIDDEN = (32,)
CNN_DEFAULT_CHANNELS = (16, 32)


def _dense(out_dim: int, in_dim: int) -> DenseLayer:
    return DenseLayer(weights=np.zeros((out_dim, in_dim)), bias=np.zeros(out_dim))


def mlp(input_dims: InputDims, hidden: Sequence[int], classes: int = NUM_CLASSES) -> Network:
    """Dense + ReLU stack ending in a LogSoftmax head."""
    layers = []
    width = input_dims.size
    for units in hidden:
        layers += [_dense(units, width), ActivationLayer(kind=ActivationKind.RELU)]
        width = units
    layers += [_dense(classes, width), ActivationLayer(kind=ActivationKind.LOG_SOFTMAX)]
    return Network(input_dims=input_dims, layers=layers)


def cnn(
    input_dims: InputDims,
    channels: Sequence[int] = CNN_DEFAULT_CHANNELS,
    kernel_size: int = 3,
    stride: int = 1,
    classes: int = NUM_CLASSES,
) -> Network:
    """Conv + ReLU stack, then a dense LogSoftmax head."""
    layers = []
    dims = input_dims
    for out_ch in channels:
        conv = ConvLayer(
            kernel=np.zeros((out_ch, dims.channels, kernel_size, kernel_size)),
            bias=np.zeros(out_ch),
            stride=(stride, stride),
        )
        dims = conv.output_dims(dims)
        layers += [conv, ActivationLayer(kind=ActivationKind.RELU)]
    layers += [_dense(classes, dims.size), ActivationLayer(kind=ActivationKind.LOG_SOFTMAX)]
    return Network(input_dims=input_dims, layers=layers)


def build_architecture(name: str, input_dims: InputDims) -> Network:
    """
    Template for a named architecture.

    Names: ``mlp-default`` (in→256→128→10), ``mlp-small`` (in→32→10),
    ``cnn-default`` (conv 16, conv 32, 3×3, dense 10) and ``mlp:W1,W2,...``
    for explicit hidden widths.

    Raises:
        ConfigurationError: On an unknown name or malformed width list
    """
    if name == "mlp-default":
        return mlp(input_dims, MLP_DEFAULT_HIDDEN)
    if name == "mlp-small":
        return mlp(input_dims, MLP_SMALL_HIDDEN)
    if name == "cnn-default":
        return cnn(input_dims)
    if name.startswith("mlp:"):
        try:
            widths = [int(w) for w in name[4:].split(",") if w.strip()]
        except ValueError as e:
            raise ConfigurationError(f"malformed hidden widths in {name!r}") from e
        if any(w < 1 for w in widths):
            raise ConfigurationError(f"hidden widths must be positive in {name!r}")
        return mlp(input_dims, widths)
    raise ConfigurationError(
        f"unknown architecture {name!r}; expected mlp-default, mlp-small, cnn-default or mlp:W,..."
    )
