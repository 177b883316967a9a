"""Pydantic schemas for empirical Lipschitz estimation."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from lipbound.config import settings
from lipbound.domain.enums import EmpiricalMode, StopAt
from lipbound.domain.models.base import ArrayModel


class EmpiricalConfig(BaseModel):
    """Settings of one batched empirical run."""

    model_config = ConfigDict(frozen=True)

    set_size: int = Field(..., ge=2, description="Batch size N")
    mode: EmpiricalMode = EmpiricalMode.PER_BATCH_RESET
    output_space: StopAt = StopAt.LOGITS
    seed: int = settings.seed
    max_pairs_per_batch: int | None = Field(None, ge=1)
    retain_quotients: bool = True


class EmpiricalRun(ArrayModel):
    """
    Result of a batched empirical run.

    ``all_quotients`` is a sorted read-only float64 array when retained.
    """

    set_size: int = Field(..., ge=2)
    mode: EmpiricalMode
    output_space: StopAt
    seed: int
    per_batch_max: list[float] = Field(..., min_length=1)
    global_max: float = Field(..., ge=0)
    avg_of_batch_values: float = Field(..., ge=0)
    avg_all_quotients: float | None = Field(None, ge=0)
    all_quotients: np.ndarray | None = None
    pairs_evaluated: int = Field(..., ge=0)
    skipped_identical: int = Field(..., ge=0)

    @field_validator("all_quotients", mode="before")
    @classmethod
    def freeze_quotients(cls, value):
        if value is None:
            return None
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_maxima(self) -> "EmpiricalRun":
        if self.global_max != max(self.per_batch_max):
            raise ValueError("global_max must equal the largest batch value")
        if self.mode == EmpiricalMode.CUMULATIVE:
            values = self.per_batch_max
            if any(b < a for a, b in zip(values, values[1:])):
                raise ValueError("cumulative batch values must be non-decreasing")
        return self

    @property
    def batches(self) -> int:
        return len(self.per_batch_max)

    def metadata(self) -> dict:
        """Run metadata file payload."""
        return {
            "seed": self.seed,
            "mode": self.mode.value,
            "N": self.set_size,
            "output_space": self.output_space.value,
            "batches": self.batches,
            "pairs_evaluated": self.pairs_evaluated,
            "skipped_identical": self.skipped_identical,
            "global_max": self.global_max,
            "avg_emp": self.avg_of_batch_values,
            "avg_all_quotients": self.avg_all_quotients,
        }


class Histogram(BaseModel):
    """Equal-width histogram."""

    bin_edges: list[float] = Field(..., min_length=2)
    counts: list[int]

    @model_validator(mode="after")
    def check_bins(self) -> "Histogram":
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("need exactly one count per bin")
        if any(b <= a for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise ValueError("bin edges must be strictly ascending")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be nonnegative")
        return self

    @property
    def total(self) -> int:
        return sum(self.counts)

    def rows(self) -> list[tuple[float, float, int]]:
        """(bin_lo, bin_hi, count) rows."""
        return [
            (self.bin_edges[i], self.bin_edges[i + 1], count)
            for i, count in enumerate(self.counts)
        ]


class ConvergenceRow(BaseModel):
    """One row of a convergence table."""

    set_size: int
    avg_emp: float
    max_emp: float


class BoundSeriesRow(BaseModel):
    """Per-batch empirical values next to the bound lines they are compared with."""

    batch: int
    emp_max: float
    running_max: float
    trivial: float | None = None
    tight: float | None = None
