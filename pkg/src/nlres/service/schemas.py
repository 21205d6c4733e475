"""Request and response bodies for the HTTP service.

All paths are strings interpreted on the server's filesystem; the service is
a local orchestration front end, not a data-upload API.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

_ALLOW_MODEL_PREFIX = ConfigDict(protected_namespaces=())


class ValidateRequest(BaseModel):
    model_config = _ALLOW_MODEL_PREFIX

    model_dir: str


class ValidateResponse(BaseModel):
    passed: bool
    report: str


class RunRequest(BaseModel):
    config_path: str


class RunResponse(BaseModel):
    output_dir: str
    files: list[str]


class GenModelRequest(BaseModel):
    recipe: str
    out_dir: str


class GenModelResponse(BaseModel):
    model_config = _ALLOW_MODEL_PREFIX

    model_dir: str


class ErrorBody(BaseModel):
    error: str
    exit_code: int


class HealthResponse(BaseModel):
    status: str
    version: str
