"""HTTP service exposing the laboratory operations.

Thin FastAPI layer over :mod:`coslab.workflows`: pydantic request/response
models, structured error payloads (``category`` is ``input`` for bad files or
parameters, ``runtime`` for faults), and nothing else. The CLI talks to this
app, in-process by default.
"""

from __future__ import annotations

from typing import List, Literal, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .nn import CheckpointError
from .scenario import InputError
from . import workflows

app = FastAPI(title="coslab", version=__version__)


class HealthResponse(BaseModel):
    status: str
    version: str


class GenScenarioRequest(BaseModel):
    kind: Literal["grid", "avenue"] = "grid"
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    seed: int = 0
    demand_scale: float = Field(default=1.0, gt=0)
    episode_s: int = 3600
    control_interval_s: int = 15
    lane: Optional[dict] = None
    out_dir: Optional[str] = None


class GenScenarioResponse(BaseModel):
    scenario_path: str
    manifest_path: str
    manifest_hash: str
    entries: int
    hourly_min: float
    hourly_max: float
    hourly_mean: float


class TrainRequest(BaseModel):
    scenario_path: str
    config: dict = Field(default_factory=dict)
    out_dir: Optional[str] = None
    resume: Optional[str] = None


class TrainResponse(BaseModel):
    checkpoint_path: str
    log_path: str
    manifest_path: str
    manifest_hash: str
    episodes: int
    steps: int
    first10_reward: float
    final10_reward: float


class EvalRequest(BaseModel):
    controller: Literal["ftc", "maxpressure", "coslight"]
    scenario_path: str
    seeds: List[int] = Field(default_factory=lambda: list(range(10)))
    episodes: int = Field(default=100, ge=1)
    checkpoint: Optional[str] = None
    ftc_duration_s: int = 30
    out_dir: Optional[str] = None


class EvalResponse(BaseModel):
    scenario_csv: str
    intersection_csv: str
    manifest_path: str
    manifest_hash: str
    aggregate: dict


class DumpRequest(BaseModel):
    kind: Literal["matrix", "embeddings"]
    checkpoint: str
    scenario_path: str
    episodes: int = Field(default=1, ge=1)
    seed: int = 0
    out_dir: Optional[str] = None


class DumpResponse(BaseModel):
    csv_path: str
    rows: int
    manifest_path: str
    manifest_hash: str


@app.exception_handler(InputError)
async def _input_error(request: Request, exc: InputError):
    return JSONResponse(status_code=400,
                        content={"category": "input", "detail": str(exc)})


@app.exception_handler(CheckpointError)
async def _checkpoint_error(request: Request, exc: CheckpointError):
    return JSONResponse(status_code=400,
                        content={"category": "input", "detail": str(exc)})


@app.exception_handler(Exception)
async def _runtime_error(request: Request, exc: Exception):
    return JSONResponse(status_code=500,
                        content={"category": "runtime", "detail": str(exc)})


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/scenarios/generate", response_model=GenScenarioResponse)
def gen_scenario(req: GenScenarioRequest) -> GenScenarioResponse:
    out = workflows.gen_scenario_cmd(
        req.kind, req.rows, req.cols, seed=req.seed, demand_scale=req.demand_scale,
        out_dir=req.out_dir, lane=req.lane, episode_s=req.episode_s,
        control_interval_s=req.control_interval_s)
    return GenScenarioResponse(**out)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest) -> TrainResponse:
    out = workflows.train_cmd(req.scenario_path, out_dir=req.out_dir,
                              config=req.config, resume=req.resume)
    return TrainResponse(**out)


@app.post("/evaluate", response_model=EvalResponse)
def evaluate_endpoint(req: EvalRequest) -> EvalResponse:
    out = workflows.eval_cmd(req.controller, req.scenario_path, req.seeds,
                             req.episodes, checkpoint=req.checkpoint,
                             out_dir=req.out_dir, ftc_duration_s=req.ftc_duration_s)
    return EvalResponse(**out)


@app.post("/dump", response_model=DumpResponse)
def dump_endpoint(req: DumpRequest) -> DumpResponse:
    out = workflows.dump_cmd(req.kind, req.checkpoint, req.scenario_path,
                             episodes=req.episodes, out_dir=req.out_dir,
                             seed=req.seed)
    return DumpResponse(**out)
