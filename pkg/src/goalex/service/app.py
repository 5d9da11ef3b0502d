"""HTTP service wrapping the workbench.

Dataset generation, comparison, and export are fast enough to answer
synchronously. Representation training and exploration runs go through a
small in-process job registry (one worker thread per job); clients poll
GET /jobs/{id} until the job reports done or error.

Errors use the same numbering as CLI exit codes: 2 config, 3 numeric, 4 I/O.
"""

from __future__ import annotations

import dataclasses
import threading
import uuid
from typing import Callable, Dict, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, workbench
from ..config import parse
from ..errors import ConfigError, NumericError
from . import schemas

app = FastAPI(title="goalex service", version=__version__)


def _error_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, NumericError):
        return 3
    if isinstance(exc, OSError):
        return 4
    return 3


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=400, content={"error_code": 2, "detail": str(exc)})


@app.exception_handler(NumericError)
async def _numeric_error(request: Request, exc: NumericError):
    return JSONResponse(status_code=500, content={"error_code": 3, "detail": str(exc)})


@app.exception_handler(OSError)
async def _os_error(request: Request, exc: OSError):
    return JSONResponse(status_code=500, content={"error_code": 4, "detail": str(exc)})


# ---------------------------------------------------------------------------
# job registry

class Job:
    def __init__(self, kind: str):
        self.id = uuid.uuid4().hex
        self.kind = kind
        self.state = "queued"
        self.detail = ""
        self.error_code: Optional[int] = None
        self.result: Optional[Dict] = None


class JobRegistry:
    def __init__(self):
        self._jobs: Dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, fn: Callable[[], Dict]) -> Job:
        job = Job(kind)
        with self._lock:
            self._jobs[job.id] = job

        def work():
            job.state = "running"
            try:
                job.result = fn()
                job.state = "done"
            except BaseException as exc:  # report, never kill the server
                job.state = "error"
                job.detail = str(exc)
                job.error_code = _error_code(exc)

        threading.Thread(target=work, daemon=True).start()
        return job

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self._jobs.get(job_id)


jobs = JobRegistry()


def _job_response(job: Job) -> schemas.JobResponse:
    return schemas.JobResponse(
        job_id=job.id,
        kind=job.kind,
        state=job.state,
        detail=job.detail,
        error_code=job.error_code,
        result=job.result,
    )


# ---------------------------------------------------------------------------
# endpoints

@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/config/validate", response_model=schemas.ValidateResponse)
def validate_config(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
    cfg = parse(req.config_text)
    return schemas.ValidateResponse(
        valid=True,
        name=cfg.name,
        variant=cfg.env.variant,
        strategy=cfg.exploration.strategy,
        budget=cfg.exploration.budget,
        seeds=list(cfg.seeds),
    )


@app.post("/datasets", response_model=schemas.DatasetResponse)
def create_dataset(req: schemas.DatasetRequest) -> schemas.DatasetResponse:
    cfg = parse(req.config_text)
    if req.seed_override is not None:
        cfg = dataclasses.replace(cfg, seeds=(req.seed_override,))
    path, count = workbench.gen_dataset(cfg, out_path=req.out_path, n_images=req.n_images)
    return schemas.DatasetResponse(path=path, count=count)


@app.post("/representations", response_model=schemas.JobResponse)
def train_representation(req: schemas.TrainRequest) -> schemas.JobResponse:
    cfg = parse(req.config_text)  # reject bad configs before queueing

    def work() -> Dict:
        return workbench.train_representation(cfg, dataset_path=req.dataset_path, out_dir=req.out_dir)

    return _job_response(jobs.submit("train-repr", work))


@app.post("/runs", response_model=schemas.JobResponse)
def start_run(req: schemas.RunRequest) -> schemas.JobResponse:
    cfg = parse(req.config_text)

    def work() -> Dict:
        rows = workbench.run_experiment(
            cfg,
            out_dir=req.out_dir,
            seed_override=req.seed_override,
            strategy_override=req.strategy_override,
        )
        return {
            "summary": [
                {"strategy": s, "seed": seed, "final_coverage": cov} for s, seed, cov in rows
            ]
        }

    return _job_response(jobs.submit("run", work))


@app.get("/jobs/{job_id}", response_model=schemas.JobResponse)
def job_status(job_id: str) -> schemas.JobResponse:
    job = jobs.get(job_id)
    if job is None:
        return JSONResponse(status_code=404, content={"error_code": 4, "detail": f"no such job {job_id}"})
    return _job_response(job)


@app.post("/compare", response_model=schemas.CompareResponse)
def compare_runs(req: schemas.CompareRequest) -> schemas.CompareResponse:
    result = workbench.compare(req.run_dirs, out_dir=req.out_dir)
    table = [
        schemas.AggregateRow(
            strategy=row[0], mean_final_coverage=row[1], std_final_coverage=row[2], n=row[3]
        )
        for row in result["table"]
    ]
    return schemas.CompareResponse(table=table, files=[str(f) for f in result.get("files", [])])


@app.post("/export", response_model=schemas.ExportResponse)
def export_history(req: schemas.ExportRequest) -> schemas.ExportResponse:
    scatter, curve = workbench.export_history(req.history_path, req.out_dir)
    return schemas.ExportResponse(scatter_path=scatter, curve_path=curve)
