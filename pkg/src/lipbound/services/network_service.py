"""
Forward evaluation of feed-forward networks.
"""

import numpy as np

from lipbound.domain.enums import ActivationKind, StopAt
from lipbound.domain.errors import InvalidInputError, ShapeError
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Layer,
    Network,
)
from lipbound.services.conv_conversion import conv2d


def as_input_batch(x, dims: InputDims) -> np.ndarray:
    """
    Reshape inputs to a (n, c, h, w) float64 batch.

    Accepted shapes: (c, h, w), (c·h·w,), (n, c, h, w) and (n, c·h·w).

    Raises:
        ShapeError: If the shape matches none of the above
        InvalidInputError: If any value is non-finite
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape == dims.shape or x.shape == (dims.size,):
        batch = x.reshape(1, *dims.shape)
    elif x.ndim == 4 and x.shape[1:] == dims.shape:
        batch = x
    elif x.ndim == 2 and x.shape[1] == dims.size:
        batch = x.reshape(x.shape[0], *dims.shape)
    else:
        raise ShapeError(f"input of shape {x.shape} does not match input dims {dims}")
    if not np.all(np.isfinite(batch)):
        raise InvalidInputError("input contains non-finite values")
    return batch


def log_softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax of a (n, d) array."""
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def apply_activation(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    """Apply an activation to a batch; LogSoftmax flattens each sample first."""
    if kind == ActivationKind.RELU:
        return np.maximum(z, 0.0)
    if kind == ActivationKind.LOG_SOFTMAX:
        return log_softmax(z.reshape(z.shape[0], -1))
    return z


def apply_layer(layer: Layer, z: np.ndarray) -> np.ndarray:
    """Apply one layer to a batch."""
    if isinstance(layer, DenseLayer):
        return z.reshape(z.shape[0], -1) @ layer.weights.T + layer.bias
    if isinstance(layer, ConvLayer):
        if z.ndim != 4:
            raise ShapeError("conv layer received a flat input")
        return conv2d(z, layer)
    if isinstance(layer, ActivationLayer):
        return apply_activation(layer.kind, z)
    raise ShapeError(f"unknown layer type {type(layer).__name__}")


def evaluated_layers(net: Network, stop: StopAt) -> tuple[Layer, ...]:
    """Layers applied for ``stop``: logits drops a trailing LogSoftmax."""
    if stop == StopAt.LOGITS and net.has_trailing_log_softmax:
        return net.layers[:-1]
    return net.layers


def forward_batch(net: Network, x, stop: StopAt = StopAt.FULL) -> np.ndarray:
    """
    Evaluate the network on a batch.

    Args:
        net: Network
        x: Inputs, see :func:`as_input_batch`
        stop: ``full`` or ``logits``

    Returns:
        Outputs of shape (n, output_size)
    """
    z = as_input_batch(x, net.input_dims)
    n = z.shape[0]
    for layer in evaluated_layers(net, stop):
        z = apply_layer(layer, z)
    return z.reshape(n, -1)


def forward(net: Network, x, stop: StopAt = StopAt.FULL) -> np.ndarray:
    """
    Evaluate the network on one input.

    Args:
        net: Network
        x: Input of shape (c, h, w) or flattened (c·h·w,)
        stop: ``full`` or ``logits``

    Returns:
        Output vector

    Raises:
        ShapeError: If the input does not match ``net.input_dims``
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape not in (net.input_dims.shape, (net.input_dims.size,)):
        raise ShapeError(
            f"input of shape {x.shape} does not match input dims {net.input_dims}"
        )
    return forward_batch(net, x, stop)[0]


def max_forward_deviation(a: Network, b: Network, n: int, seed: int = 0) -> float:
    """
    Largest absolute output difference of two networks on seeded inputs.

    Inputs are drawn uniformly from [0, 1) with the shape of ``a``'s input.

    Raises:
        ShapeError: If the networks take different inputs
    """
    if a.input_dims != b.input_dims:
        raise ShapeError(f"input dims differ: {a.input_dims} vs {b.input_dims}")
    if n < 1:
        return 0.0
    x = np.random.default_rng(seed).random((n, *a.input_dims.shape))
    return float(np.max(np.abs(forward_batch(a, x) - forward_batch(b, x))))
