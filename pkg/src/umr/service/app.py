"""HTTP registry service.

Reads are served from the in-memory index snapshot, which is swapped
atomically after each write; publishes are serialized by the local source's
writer lock.
"""

from __future__ import annotations

import datetime as dt
import logging
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from umr.advisory import serialize_advisories
from umr.errors import (
    ImmutableVersionError,
    IntegrityError,
    ManifestSyntaxError,
    NotFoundError,
    RecordError,
    VersionError,
)
from umr.record import RecordId, digest_bytes, parse_record
from umr.registry import MANIFEST_MEDIA_TYPE, LocalSource, init_local
from umr.service.schemas import Conflict, ErrorBody, PublishResult, Rejection, ServiceConfig, ViolationOut
from umr.versioning import parse_version

log = logging.getLogger(__name__)


def _error(status: int, detail: str, field: Optional[str] = None) -> JSONResponse:
    return JSONResponse(ErrorBody(detail=detail, field=field).model_dump(exclude_none=True), status_code=status)


def create_app(config: ServiceConfig, source: Optional[LocalSource] = None) -> FastAPI:
    source = source or init_local(config.data_dir, name="service")
    app = FastAPI(title="Unified model record registry", version="1")
    app.state.config = config
    app.state.source = source

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.get("/v1/index")
    def get_index(request: Request) -> Response:
        body = source.index_bytes()
        etag = f'"{digest_bytes(body)}"'
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"ETag": etag})
        return Response(body, media_type=MANIFEST_MEDIA_TYPE, headers={"ETag": etag})

    @app.get("/v1/records/{rid:path}/{version}")
    def get_record(rid: str, version: str) -> Response:
        try:
            record_id = RecordId.parse(rid)
        except ValueError as exc:
            return _error(400, str(exc), "id")
        try:
            v = parse_version(version)
        except VersionError as exc:
            return _error(400, str(exc), "version")
        try:
            data, entry = source.fetch_raw(record_id, v)
        except NotFoundError as exc:
            return _error(404, str(exc))
        except IntegrityError as exc:
            log.error("integrity failure serving %s@%s: %s", record_id, v, exc)
            return _error(500, str(exc))
        headers = {"ETag": f'"{entry.digest}"'}
        if entry.yanked:
            headers["X-UMR-Yanked"] = "true"
            headers["Warning"] = f'299 umr "{record_id}@{v} is yanked"'
        return Response(data, media_type=MANIFEST_MEDIA_TYPE, headers=headers)

    @app.post(
        "/v1/records",
        status_code=201,
        response_model=PublishResult,
        responses={409: {"model": Conflict}, 422: {"model": Rejection}, 403: {"model": ErrorBody}, 413: {"model": ErrorBody}},
    )
    async def post_record(request: Request):
        if config.read_only:
            return _error(403, "registry is read-only")
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > config.max_body_bytes:
            return _error(413, f"body exceeds {config.max_body_bytes} bytes")
        body = b""
        async for chunk in request.stream():
            body += chunk
            if len(body) > config.max_body_bytes:
                return _error(413, f"body exceeds {config.max_body_bytes} bytes")
        try:
            record = parse_record(body)
        except ManifestSyntaxError as exc:
            rej = Rejection(detail="malformed manifest", violations=[ViolationOut(severity="error", path="", message=str(exc))])
            return JSONResponse(rej.model_dump(), status_code=422)
        except RecordError as exc:
            return _rejected(exc.violations)
        try:
            index = await run_in_threadpool(source.publish, record)
        except ImmutableVersionError as exc:
            c = Conflict(detail=str(exc), id=str(record.id), version=str(record.version))
            return JSONResponse(c.model_dump(), status_code=409)
        except RecordError as exc:
            return _rejected(exc.violations)
        entry = index.get(record.id, record.version)
        return PublishResult(id=str(record.id), version=str(record.version), digest=entry.digest)

    @app.get("/v1/advisories")
    def get_advisories(since: Optional[str] = None) -> Response:
        day = None
        if since is not None:
            try:
                day = dt.date.fromisoformat(since)
            except ValueError:
                return _error(400, f"malformed date {since!r}; expected YYYY-MM-DD", "since")
        db = source.advisories()
        return Response(serialize_advisories(db.since(day)), media_type=MANIFEST_MEDIA_TYPE)

    return app


def _rejected(violations) -> JSONResponse:
    rej = Rejection(
        detail="record rejected",
        violations=[ViolationOut(severity=v.severity, path=v.path, message=v.message) for v in violations],
    )
    return JSONResponse(rej.model_dump(), status_code=422)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
