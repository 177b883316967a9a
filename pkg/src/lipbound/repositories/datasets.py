"""
Dataset loaders: MNIST (IDX), CIFAR-10 (binary batches) and seeded
synthetic data.

IDX layout (big endian):
    u32 magic | u32 count | [u32 rows | u32 cols] | u8 data...
CIFAR-10 binary layout: 3073-byte records, 1 label byte followed by
3072 pixel bytes (1024 red, 1024 green, 1024 blue, each row-major).
"""

import logging
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from lipbound.config import settings
from lipbound.domain.enums import Normalization, Split
from lipbound.domain.errors import DataFormatError
from lipbound.domain.models.dataset import NUM_CLASSES, Dataset
from lipbound.domain.models.network import InputDims

logger = logging.getLogger(__name__)

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073
CIFAR_DIMS = InputDims(channels=3, height=32, width=32)

MNIST_FILES = {
    Split.TRAIN: ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    Split.TEST: ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_DIR = "cifar-10-batches-bin"
CIFAR_FILES = {
    Split.TRAIN: tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    Split.TEST: ("test_batch.bin",),
}


class DatasetFormatError(DataFormatError):
    """Raised when a dataset file does not follow its binary layout."""
    pass


class DatasetConsistencyError(DataFormatError):
    """Raised when related dataset files disagree (e.g. image/label counts)."""
    pass


class DatasetValidationError(DataFormatError):
    """Raised when dataset contents are out of range."""
    pass


class DatasetNotFoundError(DataFormatError):
    """Raised when an expected dataset file does not exist."""
    pass


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(f"dataset file not found: {path}")
    return path.read_bytes()


def _read_be32(data: bytes, offset: int, path: Path) -> int:
    if len(data) < offset + 4:
        raise DatasetFormatError(f"{path}: truncated IDX header")
    (value,) = struct.unpack_from(">I", data, offset)
    return value


def read_idx_images(path: Path) -> np.ndarray:
    """
    Raw uint8 images of shape (count, rows, cols) from an IDX file.

    Raises:
        DatasetFormatError: Bad magic or a length that does not match the header
    """
    data = _read_bytes(path)
    magic = _read_be32(data, 0, path)
    if magic != MNIST_IMAGE_MAGIC:
        raise DatasetFormatError(f"{path}: bad image magic 0x{magic:08x}")
    count = _read_be32(data, 4, path)
    rows = _read_be32(data, 8, path)
    cols = _read_be32(data, 12, path)
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise DatasetFormatError(
            f"{path}: expected {expected} bytes for {count} images of {rows}x{cols}, "
            f"found {len(data)}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: Path) -> np.ndarray:
    """
    Raw uint8 labels from an IDX file.

    Raises:
        DatasetFormatError: Bad magic or a length that does not match the header
    """
    data = _read_bytes(path)
    magic = _read_be32(data, 0, path)
    if magic != MNIST_LABEL_MAGIC:
        raise DatasetFormatError(f"{path}: bad label magic 0x{magic:08x}")
    count = _read_be32(data, 4, path)
    if len(data) != 8 + count:
        raise DatasetFormatError(
            f"{path}: expected {8 + count} bytes for {count} labels, found {len(data)}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=8)


def normalize(pixels: np.ndarray, normalization: Normalization) -> np.ndarray:
    """
    Scale uint8 pixels of shape (n, c, h, w) to float64.

    ``scale`` maps to [0, 1]; ``standardize`` additionally removes the
    per-channel mean and divides by the per-channel std of this split.
    """
    images = pixels.astype(np.float64) / 255.0
    if normalization == Normalization.STANDARDIZE:
        mean = images.mean(axis=(0, 2, 3), keepdims=True)
        std = images.std(axis=(0, 2, 3), keepdims=True)
        images = (images - mean) / np.where(std > 0, std, 1.0)
    return images


def _check_labels(labels: np.ndarray, source: str) -> None:
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise DatasetValidationError(
            f"{source}: record {bad} has label {int(labels[bad])} outside 0..{NUM_CLASSES - 1}"
        )


def load_mnist(
    images_path: Path,
    labels_path: Path,
    split: Split = Split.TEST,
    normalization: Normalization = Normalization.SCALE,
) -> Dataset:
    """
    Load an MNIST split from its IDX files.

    Args:
        images_path: ``*-images-idx3-ubyte`` file
        labels_path: ``*-labels-idx1-ubyte`` file
        split: Split name recorded in the dataset name
        normalization: Pixel preprocessing

    Returns:
        Dataset of 1×rows×cols images

    Raises:
        DatasetFormatError: Malformed or truncated file
        DatasetConsistencyError: Image and label counts differ
    """
    raw_images = read_idx_images(images_path)
    raw_labels = read_idx_labels(labels_path)
    if raw_images.shape[0] != raw_labels.shape[0]:
        raise DatasetConsistencyError(
            f"{images_path} holds {raw_images.shape[0]} images but "
            f"{labels_path} holds {raw_labels.shape[0]} labels"
        )
    _check_labels(raw_labels, str(labels_path))

    count, rows, cols = raw_images.shape
    dims = InputDims(channels=1, height=rows, width=cols)
    dataset = Dataset(
        name=f"mnist-{Split(split).value}",
        dims=dims,
        images=normalize(raw_images.reshape(count, 1, rows, cols), normalization),
        labels=raw_labels,
    )
    logger.info("Loaded %s: %d samples of %s", dataset.name, len(dataset), dims)
    return dataset


def read_cifar_records(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """
    Raw uint8 pixels (n, 3, 32, 32) and labels (n,) of one CIFAR-10 batch file.

    Raises:
        DatasetFormatError: File length not a multiple of 3073
        DatasetValidationError: Label byte above 9
    """
    data = _read_bytes(path)
    if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES:
        raise DatasetFormatError(
            f"{path}: length {len(data)} is not a multiple of {CIFAR_RECORD_BYTES}"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0]
    _check_labels(labels, str(path))
    pixels = records[:, 1:].reshape(-1, *CIFAR_DIMS.shape)
    return pixels, labels


def load_cifar10(
    batch_paths: Sequence[Path],
    split: Split = Split.TEST,
    normalization: Normalization = Normalization.SCALE,
) -> Dataset:
    """
    Load CIFAR-10 binary batch files, concatenated in the given order.

    Returns:
        Dataset of 3×32×32 images
    """
    if not batch_paths:
        raise DatasetNotFoundError("no CIFAR-10 batch files given")
    pixels, labels = zip(*(read_cifar_records(Path(p)) for p in batch_paths))
    dataset = Dataset(
        name=f"cifar10-{Split(split).value}",
        dims=CIFAR_DIMS,
        images=normalize(np.concatenate(pixels), normalization),
        labels=np.concatenate(labels),
    )
    logger.info("Loaded %s: %d samples from %d file(s)", dataset.name, len(dataset), len(batch_paths))
    return dataset


def synthetic_dataset(dims: InputDims, n: int, seed: int = 0, name: str = "synthetic") -> Dataset:
    """
    Seeded separable dataset with pixels in [0, 1].

    The label is 1 when the mean pixel intensity exceeds 0.5, else 0.
    Pixels of class 0 are drawn from [0, 0.5) and of class 1 from [0.5, 1),
    so the two classes are separated by a margin.

    Raises:
        DataFormatError: If ``n`` < 1
    """
    if n < 1:
        raise DataFormatError(f"synthetic dataset needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    classes = rng.integers(0, 2, size=n)
    images = rng.uniform(0.0, 0.5, size=(n, *dims.shape)) + 0.5 * classes[:, None, None, None]
    labels = (images.reshape(n, -1).mean(axis=1) > 0.5).astype(np.int64)
    return Dataset(name=name, dims=dims, images=images, labels=labels)


def mnist_paths(split: Split, root: Path | None = None) -> tuple[Path, Path]:
    """Canonical MNIST file paths under the dataset root."""
    root = Path(root) if root is not None else settings.data_root
    images, labels = MNIST_FILES[Split(split)]
    return root / images, root / labels


def cifar10_paths(split: Split, root: Path | None = None) -> list[Path]:
    """Canonical CIFAR-10 batch file paths under the dataset root."""
    root = Path(root) if root is not None else settings.data_root
    return [root / CIFAR_DIR / name for name in CIFAR_FILES[Split(split)]]


def load_dataset(
    name: str,
    split: Split = Split.TEST,
    root: Path | None = None,
    normalization: Normalization = Normalization.SCALE,
) -> Dataset:
    """
    Load a named corpus from the dataset root.

    Raises:
        DatasetNotFoundError: With the expected path when a file is missing
    """
    if name == "mnist":
        images, labels = mnist_paths(split, root)
        for path in (images, labels):
            if not path.is_file():
                raise DatasetNotFoundError(
                    f"MNIST {Split(split).value} file not found: expected {path} "
                    f"(set LIPBOUND_DATA_ROOT or pass explicit paths)"
                )
        return load_mnist(images, labels, split, normalization)
    if name == "cifar10":
        paths = cifar10_paths(split, root)
        for path in paths:
            if not path.is_file():
                raise DatasetNotFoundError(
                    f"CIFAR-10 {Split(split).value} file not found: expected {path} "
                    f"(set LIPBOUND_DATA_ROOT or pass explicit paths)"
                )
        return load_cifar10(paths, split, normalization)
    raise DatasetNotFoundError(f"unknown dataset {name!r}; expected 'mnist' or 'cifar10'")
