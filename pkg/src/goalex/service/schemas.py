"""Request/response bodies for the HTTP service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    config_text: str


class ValidateResponse(BaseModel):
    valid: bool
    name: str
    variant: str
    strategy: str
    budget: int
    seeds: List[int]


class DatasetRequest(BaseModel):
    config_text: str
    out_path: Optional[str] = None
    n_images: Optional[int] = None
    seed_override: Optional[int] = None


class DatasetResponse(BaseModel):
    path: str
    count: int


class TrainRequest(BaseModel):
    config_text: str
    dataset_path: Optional[str] = None
    out_dir: Optional[str] = None


class RunRequest(BaseModel):
    config_text: str
    out_dir: Optional[str] = None
    seed_override: Optional[int] = None
    strategy_override: Optional[str] = None


class JobResponse(BaseModel):
    job_id: str
    kind: str
    state: str = Field(description="queued | running | done | error")
    detail: str = ""
    error_code: Optional[int] = None
    result: Optional[Dict] = None


class SummaryRow(BaseModel):
    strategy: str
    seed: int
    final_coverage: int


class CompareRequest(BaseModel):
    run_dirs: List[str]
    out_dir: Optional[str] = None


class AggregateRow(BaseModel):
    strategy: str
    mean_final_coverage: float
    std_final_coverage: float
    n: int


class CompareResponse(BaseModel):
    table: List[AggregateRow]
    files: List[str] = []


class ExportRequest(BaseModel):
    history_path: str
    out_dir: str


class ExportResponse(BaseModel):
    scatter_path: str
    curve_path: str


class ErrorBody(BaseModel):
    error_code: int
    detail: str
