"""Pydantic schemas for spectral estimates."""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from lipbound.config import settings


class PowerIterationConfig(BaseModel):
    """Power-iteration settings."""

    model_config = ConfigDict(frozen=True)

    tol: float = Field(settings.power_tol, gt=0, description="Relative accuracy of the estimate")
    max_iters: int = Field(settings.power_max_iters, ge=1)
    seed: int = Field(settings.seed, description="Seed of the start vector generator")


class SpectralEstimate(BaseModel):
    """Largest singular value estimate returned by power iteration."""

    model_config = ConfigDict(frozen=True)

    sigma_max: float = Field(..., ge=0)
    iterations: int = Field(..., ge=0)
    converged: bool
    residual: float = Field(..., ge=0)
    tol: float | None = Field(None, gt=0, description="Tolerance the run was checked against")

    @model_validator(mode="after")
    def check_converged_residual(self) -> "SpectralEstimate":
        """A converged estimate must meet its tolerance."""
        if self.converged and self.tol is not None and self.residual > self.tol:
            raise ValueError("converged estimate has residual above tolerance")
        return self

    @classmethod
    def exact(cls, sigma: float) -> "SpectralEstimate":
        """Estimate for a factor known in closed form (activations, zero matrices)."""
        return cls(sigma_max=sigma, iterations=0, converged=True, residual=0.0)
