"""
Base model for domain objects holding numpy arrays.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict

from lipbound.domain.errors import InvalidInputError, ShapeError


class ArrayModel(BaseModel):
    """
    Immutable pydantic model whose fields may be numpy arrays.

    Equality compares arrays element-wise and exactly, so two models are
    equal when they are structurally equal with bit-equal weights.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        for name in type(self).model_fields:
            mine, theirs = getattr(self, name), getattr(other, name)
            if isinstance(mine, np.ndarray) or isinstance(theirs, np.ndarray):
                if not np.array_equal(mine, theirs):
                    return False
            elif mine != theirs:
                return False
        return True


def frozen_array(value, ndim: int, name: str) -> np.ndarray:
    """
    Convert to a read-only finite float64 array of the given rank.

    Raises:
        ShapeError: If the rank is wrong or any dimension is empty
        InvalidInputError: If any entry is non-finite
    """
    arr = np.array(value, dtype=np.float64, copy=True)
    if arr.ndim != ndim or any(d < 1 for d in arr.shape):
        raise ShapeError(f"{name} must be a non-empty {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr
