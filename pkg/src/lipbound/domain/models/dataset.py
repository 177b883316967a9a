"""
In-memory labelled image dataset.
"""

import numpy as np
from pydantic import Field, field_validator, model_validator

from lipbound.domain.errors import DataFormatError, ShapeError
from lipbound.domain.models.base import ArrayModel
from lipbound.domain.models.network import InputDims

NUM_CLASSES = 10


class Dataset(ArrayModel):
    """
    Images of shape (n, channels, height, width) with integer labels 0..9.

    Arrays are read-only; a Dataset can be shared between threads.
    """

    name: str = Field(..., min_length=1)
    dims: InputDims
    images: np.ndarray
    labels: np.ndarray

    @field_validator("images", mode="before")
    @classmethod
    def validate_images(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise DataFormatError("dataset images contain non-finite values")
        arr.setflags(write=False)
        return arr

    @field_validator("labels", mode="before")
    @classmethod
    def validate_labels(cls, v):
        arr = np.array(v, dtype=np.int64, copy=True)
        if arr.ndim != 1:
            raise ShapeError(f"labels must be 1-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
            raise DataFormatError(f"labels must lie in 0..{NUM_CLASSES - 1}")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_shapes(self) -> "Dataset":
        expected = (self.labels.shape[0], *self.dims.shape)
        if self.images.shape != expected:
            raise ShapeError(
                f"dataset {self.name}: images shape {self.images.shape} != {expected}"
            )
        return self

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def samples(self) -> list[tuple[np.ndarray, int]]:
        """(image, label) pairs."""
        return [(self.images[i], int(self.labels[i])) for i in range(len(self))]

    def flat_images(self) -> np.ndarray:
        """Images flattened channel-major to shape (n, c·h·w)."""
        return self.images.reshape(len(self), -1)

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to ``indices`` (in the given order)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=self.name,
            dims=self.dims,
            images=self.images[idx],
            labels=self.labels[idx],
        )
