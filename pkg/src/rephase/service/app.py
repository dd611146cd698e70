"""FastAPI service exposing the re-phasing engine.

Endpoints accept dataset file contents (or fall back to the bundled
feeder), run the requested experiment synchronously and return the summary
plus the CSV payloads the CLI writes to disk.  The handler functions are
plain callables on the request models, so the CLI can invoke them
in-process without a server.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import dbfoa, experiments, loadflow
from ..netmodel import (
    HourlyProfiles,
    Network,
    NetworkFormatError,
    NetworkInvariantError,
    bundled_network,
    bundled_profiles,
    parse_network,
    parse_profiles,
)
from ..objective import CostBreakdown, Limits
from . import schemas


def _network(req) -> Network:
    if req.network is None:
        return bundled_network()
    return parse_network(req.network, source="<request>")


def _profiles(req) -> HourlyProfiles:
    if req.profiles is None:
        return bundled_profiles()
    return parse_profiles(req.profiles, source="<request>")


def _limits(req) -> Limits:
    lm = getattr(req, "limits", None)
    if lm is None:
        return Limits()
    return Limits(vuf_max=lm.vuf_max, v_min=lm.v_min, v_max=lm.v_max, k1=lm.k1, k2=lm.k2)


def _config(req, algorithm: str | None = None) -> experiments.RunConfig:
    params = dbfoa.DBFOAParams(
        s=req.dbfoa.s,
        n_c=req.dbfoa.nc,
        n_r=req.dbfoa.nr,
        n_re=req.dbfoa.nre,
        n_ed=req.dbfoa.ned,
        p_ed=req.dbfoa.ped,
        k_n=req.dbfoa.kn,
        classic_count=req.dbfoa.classic_count,
    )
    return experiments.RunConfig(
        algorithm=algorithm or getattr(req, "algorithm", "dbfoa"),
        seed=req.seed,
        limits=_limits(req),
        dbfoa_params=params,
        budget=req.budget,
        init=req.init,
        include_timing=req.include_timing,
    )


def handle_validate(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
    net = _network(req)
    profiles = _profiles(req) if req.profiles is not None else None
    return schemas.ValidateResponse(summary=experiments.validate_dataset(net, profiles))


def handle_loadflow(req: schemas.LoadflowRequest) -> schemas.LoadflowResponse:
    net = _network(req)
    snapshot = experiments.make_snapshot(net, _profiles(req), req.hour)
    assignment = (
        tuple(req.assignment) if req.assignment is not None else net.default_assignment
    )
    sol = loadflow.solve(snapshot, assignment)
    cost = CostBreakdown.from_solution(sol, Limits())
    return schemas.LoadflowResponse(
        summary={
            "hour": req.hour,
            "iterations": sol.iterations,
            "mean_vuf": cost.mean_vuf,
            "max_vuf": float(sol.vuf_percent.max()),
            "total": cost.total,
        },
        files={"solution.csv": sol.to_csv()},
    )


def handle_run(req: schemas.RunRequest) -> schemas.FileBundle:
    result = experiments.run_single(_network(req), _profiles(req), req.hour, _config(req))
    return schemas.FileBundle(summary=result.summary, files=result.files)


def handle_sweep(req: schemas.SweepRequest) -> schemas.FileBundle:
    hours = req.hours if req.hours is not None else list(range(24))
    bad = [h for h in hours if not 0 <= h <= 23]
    if bad:
        raise ValueError(f"hours out of range: {bad}")
    result = experiments.run_sweep(_network(req), _profiles(req), hours, _config(req))
    return schemas.FileBundle(summary=result.summary, files=result.files)


def handle_capacity(req: schemas.CapacityRequest) -> schemas.FileBundle:
    result = experiments.run_capacity_study(
        _network(req),
        _profiles(req),
        _config(req),
        step_kw=req.step_kw,
        steps=req.steps,
        mc_runs=req.mc_runs,
    )
    return schemas.FileBundle(summary=result.summary, files=result.files)


def handle_benchmark(req: schemas.BenchmarkRequest) -> schemas.FileBundle:
    result = experiments.run_benchmark(
        _network(req),
        _profiles(req),
        req.hour,
        req.algorithms,
        req.n_seeds,
        req.budget,
        _config(req, algorithm="dbfoa"),
        ablations=req.ablations,
    )
    return schemas.FileBundle(summary=result.summary, files=result.files)


def create_app() -> FastAPI:
    app = FastAPI(title="rephase", version="0.1.0")

    @app.exception_handler(NetworkFormatError)
    @app.exception_handler(NetworkInvariantError)
    async def _data_error(request: Request, exc: Exception):
        return JSONResponse(status_code=422, content={"detail": str(exc), "code": "data_error"})

    @app.exception_handler(loadflow.LoadFlowError)
    async def _solver_error(request: Request, exc: Exception):
        return JSONResponse(status_code=422, content={"detail": str(exc), "code": "solver_error"})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: Exception):
        return JSONResponse(status_code=422, content={"detail": str(exc), "code": "data_error"})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    app.post("/api/validate", response_model=schemas.ValidateResponse)(handle_validate)
    app.post("/api/loadflow", response_model=schemas.LoadflowResponse)(handle_loadflow)
    app.post("/api/run", response_model=schemas.FileBundle)(handle_run)
    app.post("/api/sweep", response_model=schemas.FileBundle)(handle_sweep)
    app.post("/api/capacity-study", response_model=schemas.FileBundle)(handle_capacity)
    app.post("/api/benchmark", response_model=schemas.FileBundle)(handle_benchmark)

    return app


app = create_app()
