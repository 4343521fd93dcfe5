"""HTTP service exposing code construction, verification, tables, and sweeps.

Code construction is expensive (tens of seconds for the largest split
codes) and its results are immutable, so the service keeps an in-process
cache of built codes and their decoder graphs keyed by the resolved bundle
directory.  Verification deliberately bypasses the cache: its purpose is
to check the on-disk bundle, including tampering.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .eaqecc import (
    BundleError,
    EaCssCode,
    build_ea_css,
    code_params,
    load_bundle,
    save_bundle,
    verify_code,
)
from .fingeom import CodeSpec, GeometryError, build_parity_check
from .gf2 import LinearAlgebraError
from .protocol import ProtocolConfig, ProtocolError
from .simulate import (
    SimulationError,
    SweepConfig,
    emit_tables,
    render_sweep_csv,
    render_tables_csv,
    run_sweep,
)
from .spa import DecodeError, TannerGraph, build_graph

_USER_ERRORS = (
    GeometryError,
    LinearAlgebraError,
    BundleError,
    ProtocolError,
    SimulationError,
    DecodeError,
)


class BuildRequest(BaseModel):
    family: str
    p: int = 2
    s: int
    c_sp: int = Field(default=1, alias="csp")
    r_sp: int = Field(default=1, alias="rsp")
    out_dir: str

    model_config = {"populate_by_name": True}


class BuildResponse(BaseModel):
    label: str
    n: int
    m: int
    c: int
    rate: float
    out_dir: str


class VerifyRequest(BaseModel):
    code_dir: str


class VerifyResponse(BaseModel):
    label: str
    checks: dict[str, bool]
    passed: bool


class TablesRequest(BaseModel):
    set_name: str
    max_n: int | None = None


class TablesResponse(BaseModel):
    csv: str


class SweepRequest(BaseModel):
    code_dir: str
    pe_values: list[float]
    trials: int = 10_000
    seed: int = 0
    epsilon: float = 1e-6
    mode: str = "improved"
    workers: int = 1
    full_sift: bool = False


class SweepResponse(BaseModel):
    csv: str
    rows: int


app = FastAPI(title="fgqke", version=__version__)

_cache_lock = threading.Lock()
_code_cache: dict[str, tuple[EaCssCode, TannerGraph]] = {}


def _cached_code(code_dir: str) -> tuple[EaCssCode, TannerGraph]:
    key = str(Path(code_dir).resolve())
    with _cache_lock:
        hit = _code_cache.get(key)
    if hit is not None:
        return hit
    code = load_bundle(code_dir)
    graph = build_graph(code.h1)
    with _cache_lock:
        _code_cache[key] = (code, graph)
    return code, graph


def clear_cache() -> None:
    with _cache_lock:
        _code_cache.clear()


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/build", response_model=BuildResponse)
def build(request: BuildRequest) -> BuildResponse:
    try:
        spec = CodeSpec(request.family, request.p, request.s, request.c_sp, request.r_sp)
        code = build_ea_css(build_parity_check(spec))
        save_bundle(code, request.out_dir)
    except _USER_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    n, m, c, rate = code_params(code)
    return BuildResponse(
        label=code.label(), n=n, m=m, c=c, rate=rate, out_dir=request.out_dir
    )


@app.post("/verify", response_model=VerifyResponse)
def verify(request: VerifyRequest) -> VerifyResponse:
    try:
        code = load_bundle(request.code_dir)
        checks = verify_code(code)
    except _USER_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return VerifyResponse(
        label=code.label(), checks=checks, passed=all(checks.values())
    )


@app.post("/tables", response_model=TablesResponse)
def tables(request: TablesRequest) -> TablesResponse:
    try:
        rows = emit_tables(request.set_name, request.max_n)
    except _USER_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return TablesResponse(csv=render_tables_csv(rows))


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest) -> SweepResponse:
    try:
        code, graph = _cached_code(request.code_dir)
        if code.h1.spec is None:
            raise SimulationError("bundle carries no code spec")
        config = SweepConfig(
            spec=code.h1.spec,
            pe_values=tuple(request.pe_values),
            trials=request.trials,
            base_seed=request.seed,
            epsilon=request.epsilon,
            mode=request.mode,
            full_sift=request.full_sift,
            protocol=ProtocolConfig(epsilon=request.epsilon),
        )
        rows = run_sweep(code, config, workers=request.workers, graph=graph)
    except _USER_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SweepResponse(csv=render_sweep_csv(rows), rows=len(rows))
