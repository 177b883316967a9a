"""In-memory domain models."""

from lipbound.domain.models.dataset import Dataset
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Layer,
    Network,
)

__all__ = [
    "ActivationLayer",
    "ConvLayer",
    "Dataset",
    "DenseLayer",
    "InputDims",
    "Layer",
    "Network",
]
