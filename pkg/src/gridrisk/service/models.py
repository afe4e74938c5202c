"""Request / response models of the risk evaluation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..scenario import Scenario

# Root seed used when a request does not pin one; recorded in run.json.
DEFAULT_SEED = 1729


class FilterOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    particles_per_cell_max: Optional[int] = Field(default=None, ge=1)
    birth_fraction: Optional[float] = Field(default=None, ge=0, lt=1)
    survival_probability: Optional[float] = Field(default=None, gt=0, le=1)
    position_noise: Optional[float] = Field(default=None, ge=0)
    velocity_noise: Optional[float] = Field(default=None, ge=0)
    birth_velocity_sigma: Optional[float] = Field(default=None, ge=0)
    discount: Optional[float] = Field(default=None, ge=0, le=1)
    newborns_per_cell: Optional[int] = Field(default=None, ge=1)


class LossOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cell_mass: Optional[float] = Field(default=None, gt=0)
    c1: Optional[float] = Field(default=None, ge=0)
    c2: Optional[float] = Field(default=None, ge=0)


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    mode: Literal["ego", "coop"] = "coop"
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    cell_size: Optional[float] = Field(default=None, gt=0)
    tau: Optional[float] = Field(default=None, gt=0)
    snapshot_epochs: list[int] = Field(default_factory=list)
    ego_samples: int = Field(default=100, ge=1)
    filter: Optional[FilterOverrides] = None
    loss: Optional[LossOverrides] = None


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    cell_size: Optional[float] = Field(default=None, gt=0)
    tau: Optional[float] = Field(default=None, gt=0)
    ego_samples: int = Field(default=100, ge=1)
    filter: Optional[FilterOverrides] = None
    loss: Optional[LossOverrides] = None


class RunSummary(BaseModel):
    mode: Literal["ego", "coop"]
    seed: int
    epochs: int
    final_accumulated_mean: float
    final_accumulated_variance: float
    final_plus_two_sigma: float


class RunResponse(BaseModel):
    summary: RunSummary
    files: dict[str, str]


class CompareSummary(BaseModel):
    ego: RunSummary
    coop: RunSummary
    final_mean_delta: float
    final_variance_delta: float


class CompareResponse(BaseModel):
    summary: CompareSummary
    files: dict[str, str]
