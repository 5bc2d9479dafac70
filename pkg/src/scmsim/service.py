"""HTTP service wrapping the simulator.

Endpoints mirror the CLI verbs: POST /runs trains and evaluates a config,
GET /runs/{id} replays the stored result, POST /runs/{id}/histogram bins
transmissions of the stored system, /sweeps/* run the experiment grids,
and POST /constellation is the no-training geometry dump. Runs live in
process memory; restart forgets them. NaN diagnostics (the baseline modes
have no residual) are serialized as null.
"""

from __future__ import annotations

import itertools
import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from . import __version__
from .config import RunConfig
from .constellation import avg_power, make_square_qam, min_distance, superpose
from .errors import ConfigError, ContractError
from .pipeline import (RunResult, constellation_histogram, metrics_row,
                       paf_sweep, rate_sweep, run_experiment, snr_sweep)

DEFAULT_PAF_GRID = [0.55, 0.65, 0.76, 0.85, 0.9]
DEFAULT_SNR_GRID = [0.0, 5.0, 10.0, 15.0, 20.0]
DEFAULT_RATE_GRID = [4, 8, 16]


class RunConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: str = "deepscm"
    m1: int = 4
    m2: int = 4
    paf: float = 0.8
    power: float = 1.0
    n: int = 8
    snr1_db: float = -5.0
    snr2_db: float = 20.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.1
    beta: float = 1.0
    epochs1: int = 100
    epochs2: int = 150
    epochs3: int = 50
    lr1: float = 2e-4
    lr2: float = 2e-4
    lr3: float = 5e-5
    lr_min: float = 1e-5
    lr_t0: int = 10
    lr_tmult: int = 2
    batch_size: int = 64
    hidden: int = 128
    tau: float = 1.0
    train_hard: bool = True
    seed: int = 0
    l1: int = 4
    l2: int = 8
    k: int = 32
    coarse_sep: float = 10.0
    fine_sep: float = 2.0
    noise_sd: float = 0.5
    n_samples: int = 2000
    eval_noise_draws: int = 20
    stage1_full_power: bool = False
    expected_power_norm: bool = False
    cm_epochs: int | None = None
    cm_decoder_epochs: int | None = None

    def to_config(self) -> RunConfig:
        return RunConfig(**self.model_dump())


class MetricsModel(BaseModel):
    acc1: float
    acc2: float
    psnr1: float
    psnr2: float
    acc1_se: float
    acc2_se: float
    r_norm_sq: float | None
    crosscov_max: float | None
    entropy_bound: float | None


class RowModel(BaseModel):
    mode: str
    a: float
    n: int
    snr1_db: float
    snr2_db: float
    acc1: float
    acc2: float
    psnr1: float
    psnr2: float
    r_norm_sq: float | None
    crosscov_max: float | None
    entropy_bound: float | None
    seed: int


class DiagRowModel(BaseModel):
    epoch: int
    r_norm_sq: float
    crosscov_max: float
    entropy_bound: float


class RunResponse(BaseModel):
    run_id: str
    metrics: MetricsModel
    row: RowModel
    diag: list[DiagRowModel]


class ConstellationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    m1: int = 4
    m2: int = 4
    paf: float = 0.8
    power: float = 1.0


class PointModel(BaseModel):
    i: float
    q: float


class ConstellationResponse(BaseModel):
    points: list[PointModel]
    min_distance: float
    avg_power: float


class HistogramRequest(BaseModel):
    trials: int = 2000


class HistBinModel(BaseModel):
    i: float
    q: float
    count: int


class HistogramResponse(BaseModel):
    rows: list[HistBinModel]


class SweepRequest(BaseModel):
    config: RunConfigModel = RunConfigModel()
    values: list[float] | None = None


class SweepResponse(BaseModel):
    rows: list[RowModel]


class HealthResponse(BaseModel):
    status: str
    version: str


def _nan_to_none(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _clean(d: dict) -> dict:
    return {k: _nan_to_none(v) for k, v in d.items()}


def _run_response(run_id: str, result: RunResult) -> RunResponse:
    m = result.metrics
    return RunResponse(
        run_id=run_id,
        metrics=MetricsModel(**_clean(vars(m))),
        row=RowModel(**_clean(metrics_row(result.cfg, m))),
        diag=[DiagRowModel(**d) for d in result.report.stage2_diag],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="scmsim", version=__version__)
    app.state.runs = {}
    app.state.counter = itertools.count(1)

    @app.exception_handler(ConfigError)
    def _config_error(_req: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ContractError)
    def _contract_error(_req: Request, exc: ContractError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/constellation", response_model=ConstellationResponse)
    def constellation(req: ConstellationRequest):
        sc = superpose(make_square_qam(req.m1), make_square_qam(req.m2),
                       req.paf, req.power)
        return ConstellationResponse(
            points=[PointModel(i=float(p.real), q=float(p.imag)) for p in sc.points],
            min_distance=min_distance(sc),
            avg_power=avg_power(sc.points),
        )

    @app.post("/runs", response_model=RunResponse)
    def create_run(req: RunConfigModel):
        result = run_experiment(req.to_config())
        run_id = f"run-{next(app.state.counter):04d}"
        response = _run_response(run_id, result)
        app.state.runs[run_id] = (result, response)
        return response

    @app.get("/runs/{run_id}", response_model=RunResponse)
    def get_run(run_id: str):
        if run_id not in app.state.runs:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown run {run_id}"})
        return app.state.runs[run_id][1]

    @app.post("/runs/{run_id}/histogram", response_model=HistogramResponse)
    def histogram(run_id: str, req: HistogramRequest):
        if run_id not in app.state.runs:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown run {run_id}"})
        result = app.state.runs[run_id][0]
        rows = constellation_histogram(result.params, result.cfg, req.trials)
        return HistogramResponse(rows=[HistBinModel(**r) for r in rows])

    def _sweep(req: SweepRequest, fn, default, cast=float):
        cfg = req.config.to_config()
        values = default if req.values is None else [cast(v) for v in req.values]
        return SweepResponse(rows=[RowModel(**_clean(r)) for r in fn(cfg, values)])

    @app.post("/sweeps/paf", response_model=SweepResponse)
    def sweep_paf(req: SweepRequest):
        return _sweep(req, paf_sweep, DEFAULT_PAF_GRID)

    @app.post("/sweeps/snr", response_model=SweepResponse)
    def sweep_snr(req: SweepRequest):
        return _sweep(req, snr_sweep, DEFAULT_SNR_GRID)

    @app.post("/sweeps/rate", response_model=SweepResponse)
    def sweep_rate(req: SweepRequest):
        return _sweep(req, rate_sweep, DEFAULT_RATE_GRID, cast=int)

    return app


app = create_app()
