"""
Application configuration using Pydantic Settings.
"""

from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="LIPBOUND_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # Application
    app_name: str = "lipbound"
    version: str = "0.1.0"
    log_level: str = "INFO"

    # Datasets
    data_root: Path = Path("data")

    # Power iteration
    power_tol: float = Field(1e-9, gt=0)
    power_max_iters: int = Field(10_000, ge=1)

    # Exact SVD oracle is for small matrices only
    svd_size_cap: int = Field(4096, ge=1)

    # Runs
    seed: int = 0
    threads: int = Field(1, ge=1)
    histogram_bins: int = Field(50, ge=1)
    conversion_tolerance: float = Field(1e-6, gt=0)

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names from the environment."""
        if isinstance(v, str):
            return v.upper()
        return v


# Global settings instance
settings = Settings()
