"""Pydantic request/response models for the re-phasing service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Algorithm = Literal["dbfoa", "dga", "sfla", "hs"]


class LimitsModel(BaseModel):
    vuf_max: float = 1.0
    v_min: float = 0.94
    v_max: float = 1.06
    k1: float = 10.0
    k2: float = 100.0


class DbfoaModel(BaseModel):
    s: int = 10
    nc: int = 5
    nr: int = 5
    nre: int = 5
    ned: int = 5
    ped: float = 0.2
    kn: int = 3
    classic_count: int | None = None  # PVs mutated per try in the classic ablation


class BaseRequest(BaseModel):
    """Inputs common to all experiment endpoints.

    `network`/`profiles` carry file contents; omit them to use the bundled
    dataset.
    """

    network: str | None = None
    profiles: str | None = None
    seed: int = 0
    limits: LimitsModel = Field(default_factory=LimitsModel)
    dbfoa: DbfoaModel = Field(default_factory=DbfoaModel)
    budget: int | None = None
    init: Literal["power-balance", "random"] = "power-balance"
    include_timing: bool = False


class RunRequest(BaseRequest):
    hour: int = Field(12, ge=0, le=23)
    algorithm: Algorithm = "dbfoa"


class SweepRequest(BaseRequest):
    hours: list[int] | None = None  # default: all 24
    algorithm: Algorithm = "dbfoa"


class CapacityRequest(BaseRequest):
    step_kw: float = Field(5.4, gt=0)
    steps: int = Field(10, ge=0)
    mc_runs: int = Field(20, ge=1)
    algorithm: Algorithm = "dbfoa"


class BenchmarkRequest(BaseRequest):
    hour: int = Field(12, ge=0, le=23)
    algorithms: list[Algorithm] = Field(default_factory=lambda: ["dbfoa", "dga", "sfla", "hs"])
    n_seeds: int = Field(5, ge=1)
    budget: int = Field(2000, ge=1)
    ablations: bool = False


class ValidateRequest(BaseModel):
    network: str | None = None
    profiles: str | None = None


class LoadflowRequest(BaseModel):
    network: str | None = None
    profiles: str | None = None
    hour: int = Field(12, ge=0, le=23)
    assignment: str | None = None  # e.g. "abca..."; default: as-built phases


class FileBundle(BaseModel):
    summary: dict
    files: dict[str, str]


class ValidateResponse(BaseModel):
    summary: dict


class LoadflowResponse(BaseModel):
    summary: dict
    files: dict[str, str]


class ErrorBody(BaseModel):
    detail: str
    code: Literal["data_error", "solver_error"]
