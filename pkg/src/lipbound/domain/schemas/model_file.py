"""
Pydantic schemas for the ``.lbn.json`` model file format.

Weights are flat row-major arrays; conv kernels are ordered out_ch, in_ch,
kh, kw. Shape consistency between the declared sizes and the arrays is
checked when the file is turned into a Network.
"""

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

FORMAT_VERSION = 1


class InputDimsSpec(BaseModel):
    """Input tensor dimensions."""

    model_config = ConfigDict(extra="forbid")

    c: int = Field(..., ge=1, description="Channels")
    h: int = Field(..., ge=1, description="Height")
    w: int = Field(..., ge=1, description="Width")


class DenseLayerSpec(BaseModel):
    """Dense layer: ``weights`` is out × in, row-major."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["dense"] = "dense"
    out: int = Field(..., ge=1)
    in_: int = Field(..., ge=1, alias="in")
    weights: list[float]
    bias: list[float]


class ConvLayerSpec(BaseModel):
    """Conv layer: ``kernel`` is out_ch × in_ch × kh × kw, row-major."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["conv"] = "conv"
    out_ch: int = Field(..., ge=1)
    in_ch: int = Field(..., ge=1)
    kh: int = Field(..., ge=1)
    kw: int = Field(..., ge=1)
    stride: tuple[int, int]
    pad: tuple[int, int]
    kernel: list[float]
    bias: list[float]


class ActivationSpec(BaseModel):
    """Parameter-free activation."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["relu", "logsoftmax", "identity"]


LayerSpec = Annotated[
    Union[DenseLayerSpec, ConvLayerSpec, ActivationSpec],
    Field(discriminator="kind"),
]


class ModelFile(BaseModel):
    """Top-level model document."""

    model_config = ConfigDict(extra="forbid")

    format_version: Literal[1]
    input_dims: InputDimsSpec
    layers: list[LayerSpec] = Field(..., min_length=1)
