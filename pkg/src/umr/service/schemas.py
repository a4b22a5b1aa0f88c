from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class ServiceConfig(BaseModel):
    host: str = "127.0.0.1"
    port: int = Field(8000, ge=0, le=65535)
    data_dir: str = "."
    read_only: bool = False
    max_body_bytes: int = Field(1_048_576, gt=0)


class ViolationOut(BaseModel):
    severity: str
    path: str
    message: str


class PublishResult(BaseModel):
    id: str
    version: str
    digest: str


class Rejection(BaseModel):
    detail: str
    violations: List[ViolationOut] = []


class Conflict(BaseModel):
    detail: str
    id: str
    version: str


class ErrorBody(BaseModel):
    detail: str
    field: Optional[str] = None
