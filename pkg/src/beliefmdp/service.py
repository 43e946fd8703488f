"""HTTP service exposing config validation and task execution.

The CLI talks to these handlers in-process by default; ``beliefmdp serve``
runs the same app over uvicorn so remote clients can POST configs.  /run
always answers 200 with a status field ("ok", "validation_error",
"numeric_error") so clients branch on payload, not transport errors.
"""

from __future__ import annotations

import time

from fastapi import FastAPI
from pydantic import BaseModel

from . import __version__
from .config import parse_config, validate_config
from .runner import TaskSetupError, run_task

__all__ = ["app", "handle_run", "handle_validate", "RunResponse", "ValidateResponse"]


class Artifact(BaseModel):
    filename: str
    text: str


class ConfigEnvelope(BaseModel):
    config: dict


class ValidateResponse(BaseModel):
    diagnostics: list[str]


class RunResponse(BaseModel):
    status: str                        # ok | validation_error | numeric_error
    diagnostics: list[str] = []
    summary: dict | None = None
    artifacts: list[Artifact] = []
    error: dict | None = None
    wall_clock_seconds: float | None = None
    library_version: str = __version__


def handle_validate(blob) -> ValidateResponse:
    return ValidateResponse(diagnostics=validate_config(blob))


def handle_run(blob) -> RunResponse:
    diagnostics = validate_config(blob)
    if diagnostics:
        return RunResponse(status="validation_error", diagnostics=diagnostics)
    cfg = parse_config(blob)
    start = time.perf_counter()
    try:
        result = run_task(cfg)
    except TaskSetupError as err:
        return RunResponse(status="validation_error", diagnostics=[str(err)])
    wall = time.perf_counter() - start
    return RunResponse(
        status=result.status,
        summary=result.summary,
        artifacts=[Artifact(filename=n, text=t) for n, t in result.artifacts],
        error=result.error,
        wall_clock_seconds=wall,
    )


app = FastAPI(title="beliefmdp", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/validate", response_model=ValidateResponse)
def validate_endpoint(body: ConfigEnvelope) -> ValidateResponse:
    return handle_validate(body.config)


@app.post("/run", response_model=RunResponse)
def run_endpoint(body: ConfigEnvelope) -> RunResponse:
    return handle_run(body.config)
