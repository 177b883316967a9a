"""
Conversion of convolutional layers to dense linear operators.

Three views of the same convolution are built here:
- the explicit zero-padded operator matrix (Toeplitz path),
- the unrolled input-patch matrix times the reshaped kernel (im2col path),
- the per-frequency spectrum of the circular convolution (FFT path).

Convolution is cross-correlation, as in the common deep learning
frameworks: y[o, i, j] = b[o] + sum_{c,a,b} K[o, c, a, b] x_pad[c, i·s_y + a, j·s_x + b].
"""

import logging

import numpy as np

from lipbound.domain.errors import (
    NumericalFailureError,
    ShapeError,
    UnsupportedConfigurationError,
)
from lipbound.domain.models.base import ArrayModel
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Network,
)
from lipbound.services.linalg import dft2, spectral_norm_power

logger = logging.getLogger(__name__)


class ConversionFailureError(NumericalFailureError):
    """Raised when a converted network's outputs deviate beyond tolerance."""
    pass


class ToeplitzOperator(ArrayModel):
    """Dense matrix of a bias-free zero-padded convolution."""

    matrix: np.ndarray  # (out_ch·O_Y·O_X) × (in_ch·I_Y·I_X)
    source: ConvLayer
    input_dims: InputDims
    output_dims: InputDims


class PatchMatrix(ArrayModel):
    """Unrolled input patches and the companion reshaped kernel."""

    patches: np.ndarray        # (O_Y·O_X) × (in_ch·k_h·k_w)
    kernel_matrix: np.ndarray  # (in_ch·k_h·k_w) × out_ch
    output_dims: InputDims


class ConvSpectrum(ArrayModel):
    """Singular values of the circular convolution, per frequency."""

    per_frequency_sigmas: np.ndarray  # (grid_h, grid_w, min(out_ch, in_ch)), descending
    sigma_max: float
    grid: tuple[int, int]


def im2col(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, InputDims]:
    """
    Unfold a batch of inputs into patch rows.

    Args:
        x: Inputs of shape (n, in_ch, h, w)
        layer: Convolution whose kernel size, stride and padding are used

    Returns:
        Patches of shape (n, O_Y·O_X, in_ch·k_h·k_w) and the output dims.
        Patch columns are ordered (channel, kernel row, kernel column).
    """
    n, c, h, w = x.shape
    out = layer.output_dims(InputDims(channels=c, height=h, width=w))
    kh, kw = layer.kernel_size
    (sy, sx), (ph, pw) = layer.stride, layer.padding

    img = np.pad(x, [(0, 0), (0, 0), (ph, ph), (pw, pw)], mode="constant")
    col = np.empty((n, c, kh, kw, out.height, out.width))
    for ky in range(kh):
        y_max = ky + sy * out.height
        for kx in range(kw):
            x_max = kx + sx * out.width
            col[:, :, ky, kx, :, :] = img[:, :, ky:y_max:sy, kx:x_max:sx]

    patches = col.transpose(0, 4, 5, 1, 2, 3).reshape(n, out.height * out.width, -1)
    return patches, out


def col2im(cols: np.ndarray, input_shape: tuple[int, int, int, int], layer: ConvLayer) -> np.ndarray:
    """
    Adjoint of :func:`im2col`: scatter-add patch rows back onto the input.

    Args:
        cols: Patch gradients of shape (n, O_Y·O_X, in_ch·k_h·k_w)
        input_shape: (n, in_ch, h, w)
        layer: Convolution the patches were taken for

    Returns:
        Array of ``input_shape``
    """
    n, c, h, w = input_shape
    out = layer.output_dims(InputDims(channels=c, height=h, width=w))
    kh, kw = layer.kernel_size
    (sy, sx), (ph, pw) = layer.stride, layer.padding

    col = cols.reshape(n, out.height, out.width, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    img = np.zeros((n, c, h + 2 * ph + sy - 1, w + 2 * pw + sx - 1))
    for ky in range(kh):
        y_max = ky + sy * out.height
        for kx in range(kw):
            x_max = kx + sx * out.width
            img[:, :, ky:y_max:sy, kx:x_max:sx] += col[:, :, ky, kx, :, :]
    return img[:, :, ph:ph + h, pw:pw + w]


def kernel_matrix(layer: ConvLayer) -> np.ndarray:
    """Kernel reshaped to (in_ch·k_h·k_w) × out_ch, matching im2col columns."""
    return layer.kernel.reshape(layer.out_channels, -1).T


def conv2d(x: np.ndarray, layer: ConvLayer, include_bias: bool = True) -> np.ndarray:
    """
    Batched convolution through the unrolled path.

    Args:
        x: Inputs of shape (n, in_ch, h, w)
        layer: Convolution layer
        include_bias: Add the per-channel bias

    Returns:
        Outputs of shape (n, out_ch, O_Y, O_X)
    """
    patches, out = im2col(x, layer)
    y = patches @ kernel_matrix(layer)  # (n, O_Y·O_X, out_ch)
    if include_bias:
        y = y + layer.bias
    return y.transpose(0, 2, 1).reshape(x.shape[0], *out.shape)


def unroll_forward(layer: ConvLayer, x: np.ndarray) -> tuple[PatchMatrix, np.ndarray]:
    """
    Convolve one input by unrolling it into a patch matrix.

    Args:
        layer: Convolution layer
        x: Input of shape (in_ch, h, w)

    Returns:
        The PatchMatrix and the output tensor (out_ch, O_Y, O_X), bias included

    Raises:
        ShapeError: If the input does not compose with the layer
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"unroll_forward expects a (c, h, w) input, got shape {x.shape}")
    patches, out = im2col(x[np.newaxis], layer)
    kmat = kernel_matrix(layer)
    y = patches[0] @ kmat + layer.bias
    output = y.T.reshape(out.shape)
    return PatchMatrix(patches=patches[0], kernel_matrix=kmat, output_dims=out), output


def conv_to_toeplitz(layer: ConvLayer, dims: InputDims) -> ToeplitzOperator:
    """
    Explicit matrix of the bias-free zero-padded convolution.

    Rows are indexed (out_ch, O_Y, O_X) and columns (in_ch, I_Y, I_X), both
    channel-major. Padding appears as structurally absent entries.

    Args:
        layer: Convolution layer
        dims: Input dimensions

    Returns:
        ToeplitzOperator with ``matrix @ x.ravel() == conv(x)`` (bias excluded)

    Raises:
        ShapeError: If the kernel is larger than the padded input
    """
    out = layer.output_dims(dims)
    oc, ic, kh, kw = layer.kernel.shape
    (sy, sx), (ph, pw) = layer.stride, layer.padding

    oy, ox, c, ky, kx = np.meshgrid(
        np.arange(out.height),
        np.arange(out.width),
        np.arange(ic),
        np.arange(kh),
        np.arange(kw),
        indexing="ij",
    )
    iy = oy * sy + ky - ph
    ix = ox * sx + kx - pw
    inside = (iy >= 0) & (iy < dims.height) & (ix >= 0) & (ix < dims.width)
    oy, ox, c, ky, kx, iy, ix = (a[inside] for a in (oy, ox, c, ky, kx, iy, ix))

    rows = oy * out.width + ox
    cols = (c * dims.height + iy) * dims.width + ix
    plane = out.height * out.width

    matrix = np.zeros((out.size, dims.size))
    # (row, col) pairs are unique within a channel block
    for o in range(oc):
        matrix[o * plane + rows, cols] = layer.kernel[o, c, ky, kx]

    logger.debug("Toeplitz operator %dx%d for conv %s", *matrix.shape, layer.kernel.shape)
    return ToeplitzOperator(matrix=matrix, source=layer, input_dims=dims, output_dims=out)


def circulant_grid(layer: ConvLayer, dims: InputDims) -> tuple[int, int]:
    """
    Grid of the circular convolution that dominates the zero-padded one.

    The zero-padded input extent (I + 2p per axis); with no padding this is
    the input image itself.
    """
    (ph, pw) = layer.padding
    return (dims.height + 2 * ph, dims.width + 2 * pw)


def conv_spectrum_fft(layer: ConvLayer, dims: InputDims) -> ConvSpectrum:
    """
    Exact singular values of the circular convolution from the kernel alone.

    For every frequency (u, v) the out_ch × in_ch matrix of 2-D DFT values of
    the zero-extended kernels is assembled and its singular values taken.

    Args:
        layer: Stride-1 convolution layer
        dims: Input dimensions

    Returns:
        ConvSpectrum over the circulant grid (see :func:`circulant_grid`)

    Raises:
        UnsupportedConfigurationError: If the stride is not (1, 1)
        ShapeError: If the kernel does not fit the grid
    """
    if tuple(layer.stride) != (1, 1):
        raise UnsupportedConfigurationError(
            f"FFT spectrum requires stride (1, 1), got {tuple(layer.stride)}"
        )
    layer.output_dims(dims)
    grid_h, grid_w = circulant_grid(layer, dims)
    oc, ic, kh, kw = layer.kernel.shape

    transform = np.empty((grid_h, grid_w, oc, ic), dtype=np.complex128)
    extended = np.zeros((grid_h, grid_w))
    for o in range(oc):
        for c in range(ic):
            extended[:kh, :kw] = layer.kernel[o, c]
            transform[:, :, o, c] = dft2(extended)

    sigmas = np.linalg.svd(transform, compute_uv=False)
    return ConvSpectrum(
        per_frequency_sigmas=sigmas,
        sigma_max=float(sigmas.max()),
        grid=(grid_h, grid_w),
    )


def kernel_matrix_norm(layer: ConvLayer, seed: int = 0) -> float:
    """
    Spectral norm of the reshaped (in_ch·k_h·k_w) × out_ch kernel matrix.

    Informational only: this is not an operator bound for the convolution.
    """
    return spectral_norm_power(kernel_matrix(layer), seed=seed).sigma_max


def per_filter_norm(layer: ConvLayer) -> float:
    """Largest Euclidean norm among the output-channel filters. Informational only."""
    filters = layer.kernel.reshape(layer.out_channels, -1)
    return float(np.sqrt(np.sum(filters * filters, axis=1)).max())


def convert_network(net: Network) -> Network:
    """
    Replace every conv layer by an equivalent dense layer.

    The dense weights are the Toeplitz matrix and the bias repeats each
    channel's bias O_Y·O_X times (channel-major). Activations are untouched.

    Args:
        net: Network of dense, conv and activation layers

    Returns:
        Dense-only network with identical forward outputs

    Raises:
        UnsupportedConfigurationError: On an unknown layer kind
    """
    layers = []
    for index, (layer, (shape_in, shape_out)) in enumerate(zip(net.layers, net.layer_shapes())):
        if isinstance(layer, ConvLayer):
            operator = conv_to_toeplitz(layer, shape_in)
            bias = np.repeat(layer.bias, shape_out.height * shape_out.width)
            layers.append(DenseLayer(weights=operator.matrix, bias=bias))
            logger.info(
                "Converted layer %d: conv %s on %s -> dense %dx%d",
                index, layer.kernel.shape, shape_in, *operator.matrix.shape,
            )
        elif isinstance(layer, (DenseLayer, ActivationLayer)):
            layers.append(layer)
        else:
            raise UnsupportedConfigurationError(
                f"layer {index}: cannot convert layer of type {type(layer).__name__}"
            )
    return net.with_layers(layers)


def contains_conv(net: Network) -> bool:
    """True when any layer is a convolution."""
    return any(isinstance(layer, ConvLayer) for layer in net.layers)
