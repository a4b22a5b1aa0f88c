from __future__ import annotations

import hashlib
import warnings

import pytest
from fastapi.testclient import TestClient

from helpers import LiveServer, make_record
from umr.errors import ImmutableVersionError, IntegrityError, RecordError
from umr.record import canonicalize
from umr.registry import HttpSource, RegistryIndex, RegistryView, init_local
from umr.service import ServiceConfig, create_app
from umr.versioning import parse_req


def sha(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


@pytest.fixture
def client(healthcare):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path)), source=healthcare)
    with TestClient(app) as c:
        yield c


@pytest.fixture
def empty_client(tmp_path):
    with TestClient(create_app(ServiceConfig(data_dir=str(tmp_path)))) as c:
        yield c


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200 and r.text == "ok"


def test_empty_index(empty_client):
    r = empty_client.get("/v1/index")
    assert r.status_code == 200
    assert len(RegistryIndex.parse(r.content)) == 0


def test_conditional_index(client):
    first = client.get("/v1/index")
    etag = first.headers["etag"]
    again = client.get("/v1/index", headers={"If-None-Match": etag})
    assert again.status_code == 304 and again.content == b""
    assert client.get("/v1/index", headers={"If-None-Match": '"stale"'}).status_code == 200


def test_record_bytes_match_index(client):
    index = RegistryIndex.parse(client.get("/v1/index").content)
    r = client.get("/v1/records/plip/1.0.0")
    assert r.status_code == 200
    assert sha(r.content) == index.get("plip", "1.0.0").digest
    assert r.headers["content-type"].startswith("application/x-umr+yaml")


@pytest.mark.parametrize("path,status", [("/v1/records/nobody/1.0.0", 404), ("/v1/records/plip/1.2", 400), ("/v1/records/Bad Id/1.0.0", 400)])
def test_record_errors(client, path, status):
    assert client.get(path).status_code == status


def test_publish_flow(client):
    body = canonicalize(make_record("new-model", "0.1.0"))
    r = client.post("/v1/records", content=body)
    assert r.status_code == 201
    assert r.json() == {"id": "new-model", "version": "0.1.0", "digest": sha(body)}
    assert client.get("/v1/records/new-model/0.1.0").content == body
    assert RegistryIndex.parse(client.get("/v1/index").content).get("new-model", "0.1.0") is not None
    dup = client.post("/v1/records", content=body)
    assert dup.status_code == 409 and "immutable" in dup.json()["detail"]


def test_publish_json_body(client):
    # JSON is a subset of the manifest syntax
    body = b'{"id": "json-model", "version": "1.0.0", "kind": "model", "license": "MIT", "record_format_version": 1}'
    assert client.post("/v1/records", content=body).status_code == 201


def test_publish_rejections(client):
    bad = b"id: x\nversion: '1.0.0'\nkind: model\nrecord_format_version: 1\n"
    r = client.post("/v1/records", content=bad)
    assert r.status_code == 422
    assert any(v["path"] == "license" for v in r.json()["violations"])
    r = client.post("/v1/records", content=b"a: [1,\n")
    assert r.status_code == 422


def test_body_limit(healthcare):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path), max_body_bytes=64), source=healthcare)
    with TestClient(app) as c:
        r = c.post("/v1/records", content=canonicalize(make_record("big")))
        assert r.status_code == 413


def test_read_only(healthcare):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path), read_only=True), source=healthcare)
    with TestClient(app) as c:
        assert c.post("/v1/records", content=canonicalize(make_record("x"))).status_code == 403
        assert c.get("/v1/records/plip/1.0.0").status_code == 200


def test_yanked_header(healthcare, client):
    healthcare.yank("clip", "1.0.0")
    r = client.get("/v1/records/clip/1.0.0")
    assert r.status_code == 200 and r.headers["x-umr-yanked"] == "true"


def test_tampered_file_is_500(healthcare, client):
    entry = healthcare.index().get("plip", "1.0.0")
    p = healthcare.path / entry.path
    p.write_bytes(p.read_bytes().replace(b"plip", b"pl1p", 1))
    assert client.get("/v1/records/plip/1.0.0").status_code == 500


def test_advisories_since(client):
    everything = client.get("/v1/advisories")
    assert everything.status_code == 200 and b"UMR-2022-0001" in everything.content
    recent = client.get("/v1/advisories", params={"since": "2023-01-01"})
    assert b"UMR-2022-0001" not in recent.content and b"UMR-2023-0001" in recent.content
    assert client.get("/v1/advisories", params={"since": "01/01/2023"}).status_code == 400


def test_http_source_round_trip(healthcare, tmp_path):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path)), source=healthcare)
    with LiveServer(app) as live:
        remote = HttpSource(live.url, name="remote")
        try:
            assert remote.fetch_record("plip", "1.0.0") == healthcare.fetch_record("plip", "1.0.0")
            rec = make_record("remote-model", "1.0.0", deps=[("plip", "model", "^1.0.0", "fine_tune")])
            result = remote.publish(rec)
            assert result["digest"] == sha(canonicalize(rec))
            with pytest.raises(ImmutableVersionError):
                remote.publish(rec)
            with pytest.raises(RecordError):
                remote.publish(canonicalize(make_record("x")).replace(b'license: "MIT"', b'license: ""'))
            # the conditional refresh keeps the cached index when nothing changed
            idx = remote.refresh()
            assert remote.refresh() is idx
            view = RegistryView([remote])
            assert view.lookup("remote-model", parse_req("*")) == rec
            assert len(remote.advisories()) == 2
        finally:
            remote.close()


def test_http_source_detects_tamper(healthcare):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path)), source=healthcare)
    with LiveServer(app) as live:
        remote = HttpSource(live.url, name="remote")
        remote.index()
        # the server re-verifies too; simulate a hostile server by changing the cached index digest
        entry = remote._index.get("clip", "1.0.0")
        remote._index.entries["clip"]["1.0.0"] = type(entry)("0" * 64, entry.kind, entry.path, entry.yanked)
        with pytest.raises(IntegrityError):
            remote.fetch_record("clip", "1.0.0")
        remote.close()


def test_private_overlay_over_http(healthcare, tmp_path):
    app = create_app(ServiceConfig(data_dir=str(healthcare.path)), source=healthcare)
    private = init_local(tmp_path / "private", name="private")
    private.publish(make_record("plip", "9.0.0", title="internal plip"))
    with LiveServer(app) as live:
        remote = HttpSource(live.url, name="public")
        view = RegistryView([private, remote])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            assert view.lookup("plip", parse_req("*")).title == "internal plip"
        assert len(caught) == 1
        remote.close()
