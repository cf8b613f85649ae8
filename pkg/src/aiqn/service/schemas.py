"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateDataRequest(BaseModel):
    config: dict = Field(default_factory=dict,
                         description="experiment config keys (flat, typed as strings ok)")
    out_path: str = Field(description="where to write the dataset tensor")


class GenerateDataResponse(BaseModel):
    path: str
    shape: list[int]
    seed: int


class TrainRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    dataset_path: str
    checkpoint_path: str
    metrics_path: str | None = None


class TrainResponse(BaseModel):
    checkpoint_path: str
    steps: int
    final_loss: float


class SampleServiceRequest(BaseModel):
    checkpoint_path: str
    count: int = 16
    seed: int = 0
    clamp: tuple[float, float] | None = None
    context: list[float] | None = None
    out_path: str | None = None
    return_values: bool = True


class SampleServiceResponse(BaseModel):
    shape: list[int]
    seed: int
    values: list[list[float]] | None = None
    path: str | None = None


class InpaintServiceRequest(BaseModel):
    checkpoint_path: str
    prefix: list[float]
    count: int = 16
    seed: int = 0
    out_path: str | None = None
    return_values: bool = True


class MetricRowModel(BaseModel):
    metric: str
    value: float
    samples: int
    seed: int


class EvalServiceRequest(BaseModel):
    checkpoint_path: str
    dataset_path: str
    seed: int = 0
    sample_count: int | None = None


class EvalServiceResponse(BaseModel):
    rows: list[MetricRowModel]


class GradCheckRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    seed: int = 0


class GradCheckResponse(BaseModel):
    max_relative_error: float
    worst_parameter: str
    passed: bool


class DensityRequest(BaseModel):
    checkpoint_path: str
    taus: list[float]
    dim: int = 0
    prefix: list[float] = Field(default_factory=list)


class DensityRow(BaseModel):
    tau: float
    exact: float
    finite_difference: float
    implied_density: float | None


class DensityResponse(BaseModel):
    rows: list[DensityRow]
