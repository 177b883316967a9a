"""
Enumerations for domain models.
"""

from enum import Enum


class ActivationKind(str, Enum):
    """Element-wise activations allowed between affine layers."""
    RELU = "relu"
    LOG_SOFTMAX = "logsoftmax"
    IDENTITY = "identity"


class LayerKind(str, Enum):
    """Layer kind tags used in model files."""
    DENSE = "dense"
    CONV = "conv"
    RELU = "relu"
    LOG_SOFTMAX = "logsoftmax"
    IDENTITY = "identity"


class StopAt(str, Enum):
    """Where forward evaluation stops."""
    FULL = "full"
    LOGITS = "logits"  # Before a trailing LogSoftmax


class ConvMethod(str, Enum):
    """How a conv layer's spectral norm is obtained."""
    TOEPLITZ = "toeplitz"  # Power iteration on the zero-padded operator
    FFT = "fft"            # Exact circulant spectrum, stride 1 only


class NormKind(str, Enum):
    """Origin of a per-layer factor in a bound report."""
    DENSE = "dense"
    CONV_TOEPLITZ = "conv-toeplitz"
    CONV_FFT = "conv-fft"
    ACTIVATION = "activation"


class EmpiricalMode(str, Enum):
    """How the running maximum is handled between batches."""
    PER_BATCH_RESET = "per-batch"  # Maximum restarts every batch
    CUMULATIVE = "cumulative"      # Literal running maximum


class Normalization(str, Enum):
    """Pixel preprocessing applied by dataset loaders."""
    SCALE = "scale"              # x / 255
    STANDARDIZE = "standardize"  # x / 255, then per-channel mean/std


class Split(str, Enum):
    """Dataset split."""
    TRAIN = "train"
    TEST = "test"
