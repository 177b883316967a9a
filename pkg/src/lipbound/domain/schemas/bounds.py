"""Pydantic schemas for Lipschitz bound reports."""

import math

from pydantic import BaseModel, Field, model_validator

from lipbound.domain.enums import ConvMethod, NormKind
from lipbound.domain.schemas.linalg import SpectralEstimate


class LayerNorm(BaseModel):
    """Lipschitz factor contributed by one layer."""

    layer_index: int = Field(..., ge=0)
    kind: NormKind
    sigma: SpectralEstimate

    def to_dict(self) -> dict:
        """Row of the ``per_layer`` array in the report file."""
        return {
            "index": self.layer_index,
            "kind": self.kind.value,
            "sigma_max": self.sigma.sigma_max,
            "iterations": self.sigma.iterations,
            "converged": self.sigma.converged,
        }


class GapReport(BaseModel):
    """Ratios of the trivial and tight bounds over the empirical maximum."""

    trivial: float = Field(..., ge=0)
    tight_external: float | None = Field(None, ge=0)
    empirical_max: float | None = Field(None, gt=0)
    gap_trivial_over_emp: float | None = None
    gap_tight_over_emp: float | None = None

    @model_validator(mode="after")
    def check_gap_presence(self) -> "GapReport":
        """Gaps are present exactly when numerator and denominator are."""
        if (self.gap_trivial_over_emp is not None) != (self.empirical_max is not None):
            raise ValueError("gap_trivial_over_emp requires empirical_max")
        expects_tight_gap = self.empirical_max is not None and self.tight_external is not None
        if (self.gap_tight_over_emp is not None) != expects_tight_gap:
            raise ValueError("gap_tight_over_emp requires tight_external and empirical_max")
        return self

    def summary_lines(self) -> list[str]:
        """Human-readable lines with ratios to 2 decimal places."""
        lines = [f"trivial bound:      {self.trivial:.3f}"]
        if self.tight_external is not None:
            lines.append(f"tight bound (ext.): {self.tight_external:.3f}")
        if self.empirical_max is not None:
            lines.append(f"empirical max:      {self.empirical_max:.3f}")
            lines.append(f"trivial / empirical: {self.gap_trivial_over_emp:.2f}x")
        if self.gap_tight_over_emp is not None:
            lines.append(f"tight / empirical:   {self.gap_tight_over_emp:.2f}x")
        return lines


class BoundReport(GapReport):
    """Trivial bound of a network with per-layer factors and optional gaps."""

    per_layer: list[LayerNorm]
    conv_method: ConvMethod = ConvMethod.TOEPLITZ
    excluded_layers: list[int] = Field(
        default_factory=list,
        description="LogSoftmax layers left out of the product; the bound covers the logits map",
    )

    @model_validator(mode="after")
    def check_product(self) -> "BoundReport":
        """``trivial`` is the product of the per-layer factors."""
        product = math.prod(entry.sigma.sigma_max for entry in self.per_layer)
        if not math.isclose(self.trivial, product, rel_tol=1e-9, abs_tol=1e-300):
            raise ValueError(f"trivial {self.trivial} != product of factors {product}")
        return self

    @property
    def converged(self) -> bool:
        return all(entry.sigma.converged for entry in self.per_layer)

    def to_dict(self) -> dict:
        """Report file payload."""
        return {
            "per_layer": [entry.to_dict() for entry in self.per_layer],
            "trivial": self.trivial,
            "tight_external": self.tight_external,
            "empirical_max": self.empirical_max,
            "gap_trivial_over_emp": self.gap_trivial_over_emp,
            "gap_tight_over_emp": self.gap_tight_over_emp,
            "conv_method": self.conv_method.value,
            "excluded_layers": self.excluded_layers,
        }
