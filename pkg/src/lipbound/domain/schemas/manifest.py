"""Pydantic schema for run manifests."""

from datetime import datetime, timezone
from typing import Any

from pydantic import BaseModel, Field

from lipbound import __version__


class RunManifest(BaseModel):
    """Record of one CLI run: what was run, with which settings, and what it wrote."""

    command: str = Field(..., description="Subcommand name")
    argv: list[str] = Field(default_factory=list, description="Arguments the command was given")
    config: dict[str, Any] = Field(default_factory=dict, description="Effective configuration")
    seed: int
    artifacts: list[str] = Field(default_factory=list)
    tool_version: str = __version__
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
