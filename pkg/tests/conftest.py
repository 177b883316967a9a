"""
Pytest configuration and shared fixtures.
"""

import struct
from pathlib import Path

import numpy as np
import pytest

from lipbound.domain.enums import ActivationKind
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Network,
)
from lipbound.repositories.datasets import synthetic_dataset


def relu() -> ActivationLayer:
    return ActivationLayer(kind=ActivationKind.RELU)


def log_softmax() -> ActivationLayer:
    return ActivationLayer(kind=ActivationKind.LOG_SOFTMAX)


def random_dense(rng: np.random.Generator, out_dim: int, in_dim: int) -> DenseLayer:
    return DenseLayer(weights=rng.normal(size=(out_dim, in_dim)), bias=rng.normal(size=out_dim))


def random_conv(
    rng: np.random.Generator,
    out_ch: int,
    in_ch: int,
    k: int = 3,
    stride: int = 1,
    padding: int = 0,
) -> ConvLayer:
    return ConvLayer(
        kernel=rng.normal(size=(out_ch, in_ch, k, k)),
        bias=rng.normal(size=out_ch),
        stride=(stride, stride),
        padding=(padding, padding),
    )


def direct_conv(layer: ConvLayer, x: np.ndarray) -> np.ndarray:
    """Nested-loop cross-correlation with zero padding, bias excluded."""
    oc, ic, kh, kw = layer.kernel.shape
    (sy, sx), (ph, pw) = layer.stride, layer.padding
    _, h, w = x.shape
    padded = np.zeros((ic, h + 2 * ph, w + 2 * pw))
    padded[:, ph:ph + h, pw:pw + w] = x
    oy = (h + 2 * ph - kh) // sy + 1
    ox = (w + 2 * pw - kw) // sx + 1
    out = np.zeros((oc, oy, ox))
    for o in range(oc):
        for i in range(oy):
            for j in range(ox):
                total = 0.0
                for c in range(ic):
                    for a in range(kh):
                        for b in range(kw):
                            total += layer.kernel[o, c, a, b] * padded[c, i * sy + a, j * sx + b]
                out[o, i, j] = total
    return out


def with_spectrum(rng: np.random.Generator, sigmas) -> tuple[np.ndarray, np.ndarray]:
    """Square matrix Q1 diag(sigmas) Q2ᵀ and its right singular vectors Q2."""
    n = len(sigmas)
    q1, _ = np.linalg.qr(rng.normal(size=(n, n)))
    q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q1 @ np.diag(sigmas) @ q2.T, q2


def circulant_matrix(layer: ConvLayer, grid: tuple[int, int]) -> np.ndarray:
    """Explicit matrix of the circular cross-correlation on ``grid``."""
    oc, ic, kh, kw = layer.kernel.shape
    gh, gw = grid
    matrix = np.zeros((oc * gh * gw, ic * gh * gw))
    for o in range(oc):
        for i in range(gh):
            for j in range(gw):
                row = (o * gh + i) * gw + j
                for c in range(ic):
                    for a in range(kh):
                        for b in range(kw):
                            col = (c * gh + (i + a) % gh) * gw + (j + b) % gw
                            matrix[row, col] += layer.kernel[o, c, a, b]
    return matrix


def write_idx_images(path: Path, images: np.ndarray) -> Path:
    """Write uint8 images (n, rows, cols) as an IDX3 file."""
    n, rows, cols = images.shape
    path.write_bytes(struct.pack(">IIII", 0x803, n, rows, cols) + images.astype(np.uint8).tobytes())
    return path


def write_idx_labels(path: Path, labels: np.ndarray) -> Path:
    """Write uint8 labels as an IDX1 file."""
    path.write_bytes(struct.pack(">II", 0x801, len(labels)) + np.asarray(labels, np.uint8).tobytes())
    return path


def write_cifar_batch(path: Path, pixels: np.ndarray, labels: np.ndarray) -> Path:
    """Write (n, 3, 32, 32) uint8 pixels and labels as a CIFAR-10 binary batch."""
    n = len(labels)
    records = np.empty((n, 3073), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = pixels.reshape(n, -1)
    path.write_bytes(records.tobytes())
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def dense_net(rng) -> Network:
    """Small MLP on 1x4x4 inputs with a LogSoftmax head."""
    return Network(
        input_dims=InputDims(channels=1, height=4, width=4),
        layers=[
            random_dense(rng, 8, 16),
            relu(),
            random_dense(rng, 10, 8),
            log_softmax(),
        ],
    )


@pytest.fixture
def conv_net(rng) -> Network:
    """Small CNN on 2x6x6 inputs: padded conv, strided conv, dense head."""
    conv1 = random_conv(rng, 3, 2, k=3, padding=1)
    conv2 = random_conv(rng, 2, 3, k=2, stride=2)
    return Network(
        input_dims=InputDims(channels=2, height=6, width=6),
        layers=[conv1, relu(), conv2, relu(), random_dense(rng, 10, 2 * 3 * 3), log_softmax()],
    )


@pytest.fixture
def synthetic():
    """Separable synthetic dataset on 1x4x4 images."""
    return synthetic_dataset(InputDims(channels=1, height=4, width=4), 60, seed=3)
