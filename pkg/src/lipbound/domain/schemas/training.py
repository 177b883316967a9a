"""Pydantic schemas for training runs."""

from pydantic import BaseModel, ConfigDict, Field

from lipbound.config import settings


class TrainConfig(BaseModel):
    """Mini-batch Adam settings."""

    model_config = ConfigDict(frozen=True)

    epochs: int = Field(4, ge=0)
    learning_rate: float = Field(1e-3, gt=0)
    batch_size: int = Field(128, ge=1)
    seed: int = settings.seed
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)


class EpochRecord(BaseModel):
    """One row of the training log."""

    epoch: int = Field(..., ge=1)
    train_loss: float
    test_acc: float | None = Field(None, ge=0, le=1)
