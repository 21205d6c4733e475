"""FastAPI application exposing the command layer.

Domain errors surface as HTTP 400 with the would-be CLI exit code in the
body, so a remote client can report exactly what a local run would have.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import NlresError
from ..runner import LOCK_NAME, cmd_gen_model, cmd_oracle, cmd_run, cmd_validate
from .schemas import (
    GenModelRequest,
    GenModelResponse,
    HealthResponse,
    RunRequest,
    RunResponse,
    ValidateRequest,
    ValidateResponse,
)


def _listing(out: Path) -> list[str]:
    return sorted(p.name for p in out.iterdir() if p.name != LOCK_NAME)


def create_app() -> FastAPI:
    app = FastAPI(title="nlres", version=__version__)

    @app.exception_handler(NlresError)
    async def _domain_error(request: Request, exc: NlresError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": str(exc), "exit_code": exc.exit_code}
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> ValidateResponse:
        code, report = cmd_validate(req.model_dir)
        return ValidateResponse(passed=code == 0, report=report)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        out = cmd_run(req.config_path)
        return RunResponse(output_dir=str(out), files=_listing(out))

    @app.post("/oracle", response_model=RunResponse)
    def oracle(req: RunRequest) -> RunResponse:
        out = cmd_oracle(req.config_path)
        return RunResponse(output_dir=str(out), files=_listing(out))

    @app.post("/gen-model", response_model=GenModelResponse)
    def gen_model(req: GenModelRequest) -> GenModelResponse:
        out = cmd_gen_model(req.recipe, req.out_dir)
        return GenModelResponse(model_dir=str(out))

    return app
