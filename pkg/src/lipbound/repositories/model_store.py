"""
Reading and writing networks in the ``.lbn.json`` model file format.
"""

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from lipbound.domain.enums import ActivationKind
from lipbound.domain.errors import DataFormatError, LipboundError
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Network,
)
from lipbound.domain.schemas.model_file import (
    ActivationSpec,
    FORMAT_VERSION,
    ConvLayerSpec,
    DenseLayerSpec,
    InputDimsSpec,
    ModelFile,
)
from lipbound.repositories.artifacts import atomic_write_text, render_json

logger = logging.getLogger(__name__)

MODEL_SUFFIX = ".lbn.json"


class ModelFileParseError(DataFormatError):
    """Raised when a model file is not well-formed."""
    pass


class ModelValidationError(DataFormatError):
    """Raised when a well-formed model file describes an inconsistent network."""
    pass


def network_to_document(net: Network) -> ModelFile:
    """Build the file document for a network."""
    layers = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            layers.append(
                DenseLayerSpec(
                    out=layer.out_dim,
                    in_=layer.in_dim,
                    weights=layer.weights.ravel().tolist(),
                    bias=layer.bias.tolist(),
                )
            )
        elif isinstance(layer, ConvLayer):
            oc, ic, kh, kw = layer.kernel.shape
            layers.append(
                ConvLayerSpec(
                    out_ch=oc,
                    in_ch=ic,
                    kh=kh,
                    kw=kw,
                    stride=tuple(layer.stride),
                    pad=tuple(layer.padding),
                    kernel=layer.kernel.ravel().tolist(),
                    bias=layer.bias.tolist(),
                )
            )
        else:
            layers.append(ActivationSpec(kind=layer.kind.value))
    dims = net.input_dims
    return ModelFile(
        format_version=FORMAT_VERSION,
        input_dims=InputDimsSpec(c=dims.channels, h=dims.height, w=dims.width),
        layers=layers,
    )


def _check_length(index: int, field: str, values: list[float], expected: int) -> None:
    if len(values) != expected:
        raise ModelValidationError(
            f"layers.{index}.{field}: expected {expected} values, got {len(values)}"
        )


def network_from_document(doc: ModelFile) -> Network:
    """
    Build a Network from a parsed document.

    Raises:
        ModelValidationError: If array lengths or layer shapes are inconsistent
    """
    layers = []
    try:
        for index, spec in enumerate(doc.layers):
            if isinstance(spec, DenseLayerSpec):
                _check_length(index, "weights", spec.weights, spec.out * spec.in_)
                _check_length(index, "bias", spec.bias, spec.out)
                layers.append(
                    DenseLayer(
                        weights=np.array(spec.weights).reshape(spec.out, spec.in_),
                        bias=spec.bias,
                    )
                )
            elif isinstance(spec, ConvLayerSpec):
                shape = (spec.out_ch, spec.in_ch, spec.kh, spec.kw)
                _check_length(index, "kernel", spec.kernel, int(np.prod(shape)))
                _check_length(index, "bias", spec.bias, spec.out_ch)
                layers.append(
                    ConvLayer(
                        kernel=np.array(spec.kernel).reshape(shape),
                        bias=spec.bias,
                        stride=spec.stride,
                        padding=spec.pad,
                    )
                )
            else:
                layers.append(ActivationLayer(kind=ActivationKind(spec.kind)))

        dims = doc.input_dims
        return Network(
            input_dims=InputDims(channels=dims.c, height=dims.h, width=dims.w),
            layers=layers,
        )
    except ModelValidationError:
        raise
    except (LipboundError, ValidationError) as e:
        raise ModelValidationError(f"inconsistent network: {e}") from e


def _describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"])
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_model(text: str, source: str = "<string>") -> Network:
    """
    Parse model file text.

    Raises:
        ModelFileParseError: On invalid JSON (with line/column) or an invalid
            document (with the offending field path, e.g. an unknown ``kind`` tag)
        ModelValidationError: If the document describes an inconsistent network
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileParseError(
            f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    try:
        doc = ModelFile.model_validate(data)
    except ValidationError as e:
        raise ModelFileParseError(f"{source}: {_describe_validation_error(e)}") from e
    return network_from_document(doc)


def render_model(net: Network) -> str:
    """Canonical model file text for ``net``."""
    doc = network_to_document(net)
    return render_json(doc.model_dump(by_alias=True, mode="json"))


def save_model(net: Network, path: Path) -> Path:
    """
    Write ``net`` to ``path`` atomically.

    Weights are written with full float64 precision, so loading the file
    gives bit-equal arrays.
    """
    path = atomic_write_text(Path(path), render_model(net))
    logger.info("Saved model with %d layers to %s", len(net.layers), path)
    return path


def load_model(path: Path) -> Network:
    """
    Read a network from ``path``.

    Raises:
        ModelFileParseError: If the file is missing, unreadable or malformed
        ModelValidationError: If the network it describes is inconsistent
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelFileParseError(f"cannot read model file {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise ModelFileParseError(
            f"{path}: not valid UTF-8 at byte {e.start}: {e.reason}"
        ) from e
    net = parse_model(text, source=str(path))
    logger.debug("Loaded model %s (%d layers)", path, len(net.layers))
    return net
