from __future__ import annotations

import random
from pathlib import Path

import pytest
from click.testing import CliRunner

from helpers import cycle_records, dag_records, make_record
from oracles import dependents_of, random_dag
from umr.cli import main
from umr.fixtures import fixture_dir
from umr.record import canonicalize
from umr.registry import init_local

DOWNSTREAM = ("r2t-mil", "breast-cancer-tumor-immune-phenotypes", "vlm-cpl", "pathldm")


@pytest.fixture
def run(umr_env):
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)

    return invoke


def test_init_scaffold(run):
    r = run("init", "my-model", "0.1.0")
    assert r.exit_code == 0 and r.stdout.strip() == "my-model-0.1.0.umr.yaml"
    text = Path("my-model-0.1.0.umr.yaml").read_text()
    assert "dependencies: []" in text
    assert run("init", "my-model", "0.1.0").exit_code == 2


def test_init_from_plip(run):
    r = run("init", "--from", "plip@1.0.0", "--relation", "fine_tune", "my-ft", "0.1.0")
    assert r.exit_code == 0
    text = Path("my-ft-0.1.0.umr.yaml").read_text()
    assert 'target: "plip"' in text and 'req: "=1.0.0"' in text
    assert run("validate", "my-ft-0.1.0.umr.yaml").exit_code == 0


def test_init_errors(run):
    r = run("init", "--from", "plip@1.0.0", "--relation", "training_data", "x", "0.1.0")
    assert r.exit_code == 2 and "dataset relation" in r.stderr
    assert run("init", "--from", "nobody@1.0.0", "x", "0.1.0").exit_code == 4
    assert run("init", "Bad Name", "0.1.0").exit_code == 2
    assert run("init", "x", "1.2").exit_code == 2


def write(path: str, data: bytes) -> str:
    Path(path).write_bytes(data)
    return path


def test_validate(run):
    good = write("good.yaml", (fixture_dir("healthcare") / "plip-1.0.0.umr.yaml").read_bytes().replace(b"license: unknown", b"license: MIT"))
    assert run("validate", good).exit_code == 0
    assert run("validate", "--strict", good).exit_code == 0
    warn = write("warn.yaml", (fixture_dir("healthcare") / "plip-1.0.0.umr.yaml").read_bytes())
    r = run("validate", warn)
    assert r.exit_code == 0 and "warning: license" in r.stdout
    assert run("validate", "--strict", warn).exit_code == 3
    missing = write("missing.yaml", b"id: x\nversion: '1.0.0'\nkind: model\nrecord_format_version: 1\n")
    r = run("validate", missing)
    assert r.exit_code == 3 and "license" in r.stderr
    assert run("validate", write("broken.yaml", b"a: [\n")).exit_code == 3


def test_resolve(run):
    r = run("resolve", "plip@1.0.0")
    lines = r.stdout.splitlines()
    assert r.exit_code == 0 and len(lines) == 4 and lines[0] == "plip@1.0.0"
    assert run("resolve", "clip@1.0.0").stdout.splitlines() == ["clip@1.0.0"]
    assert run("resolve", "plip@7.0.0").exit_code == 4
    assert run("resolve", "plip").exit_code == 2


def test_resolve_missing(run, umr_env):
    umr_env.publish(make_record("orphan", deps=[("ghost", "dataset", "*", "training_data")]))
    assert run("resolve", "orphan@1.0.0").exit_code == 4
    r = run("resolve", "--allow-missing", "orphan@1.0.0")
    assert r.exit_code == 0 and "ghost@unresolved" in r.stdout


def test_resolve_cycle(run, umr_env):
    for rec in cycle_records(2):
        umr_env.publish(rec)
    r = run("resolve", "c0@1.0.0")
    assert r.exit_code == 4 and "cycle" in r.stderr


def test_audit(run):
    r = run("audit", "pathldm@1.0.0")
    assert r.exit_code == 1 and "pathldm → plip → laion-5b" in r.stdout
    assert run("audit", "--warn-only", "pathldm@1.0.0").exit_code == 0
    clean = run("audit", "clip@1.0.0")
    assert clean.exit_code == 0 and "No advisories affect this record." in clean.stdout
    for fmt in ("html", "latex", "umr"):
        assert run("audit", "--format", fmt, "pathldm@1.0.0").exit_code == 1


@pytest.mark.parametrize("name", DOWNSTREAM)
def test_audit_each_downstream(run, name):
    r = run("audit", f"{name}@1.0.0")
    assert r.exit_code == 1 and f"{name} → plip → laion-5b" in r.stdout


def test_audit_with_advisory_file(run):
    empty = write("none.yaml", b"[]\n")
    assert run("audit", "--advisories", empty, "pathldm@1.0.0").exit_code == 0
    assert run("audit", "--advisories", write("bad.yaml", b"nope: 1\n"), "pathldm@1.0.0").exit_code == 3


def test_impact(run):
    r = run("impact", "laion-5b")
    names = {ln.split("@")[0] for ln in r.stdout.splitlines()}
    assert r.exit_code == 0 and names == {"plip", *DOWNSTREAM}
    assert "plip-authors@example.org" in r.stdout
    assert run("impact", "pathldm").stdout == ""
    with_target = run("impact", "--include-target", "laion-5b@*")
    assert "laion-5b@0.0.0+date.20220331" in with_target.stdout


def test_impact_matches_oracle(tmp_path, monkeypatch):
    runner = CliRunner()
    for seed in range(10):
        rng = random.Random(300 + seed)
        dag = random_dag(rng, max_nodes=15)
        src = init_local(tmp_path / f"r{seed}")
        for rec in dag_records(dag):
            src.publish(rec)
        monkeypatch.setenv("UMR_REGISTRY", str(src.path))
        target = rng.choice(dag.names)
        r = runner.invoke(main, ["impact", target])
        got = {ln.split("@")[0] for ln in r.stdout.splitlines()}
        assert got == dependents_of(dag.edges, target)


def test_render(run):
    r = run("render", "plip@1.0.0", "--format", "dot", "-o", "-")
    assert r.exit_code == 0 and r.stdout.count(" -> ") == 3
    assert run("render", "plip@1.0.0", "--format", "pdf").exit_code == 2
    r = run("render", "plip@1.0.0", "--format", "html", "-o", "plip.html")
    assert r.exit_code == 0 and Path("plip.html").read_text().startswith("<!DOCTYPE html>")
    for fmt in ("markdown", "latex"):
        assert run("render", "plip@1.0.0", "--format", fmt).exit_code == 0


def test_publish_and_yank(run, umr_env):
    f = write("rec.yaml", canonicalize(make_record("pub-me", "1.0.0")))
    r = run("publish", f)
    assert r.exit_code == 0 and len(r.stdout.splitlines()[-1]) == 64
    again = run("publish", f)
    assert again.exit_code == 3 and "version immutable" in again.stderr
    assert run("yank", "pub-me@1.0.0").exit_code == 0
    assert umr_env.index().get("pub-me", "1.0.0") is None  # the fixture object holds a stale snapshot
    umr_env.refresh()
    assert umr_env.index().get("pub-me", "1.0.0").yanked
    assert run("yank", "pub-me@9.0.0").exit_code == 4
    assert run("publish", "--to", "nowhere", f).exit_code == 2


def test_integrity_exit(run, umr_env):
    entry = umr_env.index().get("clip", "1.0.0")
    p = umr_env.path / entry.path
    data = bytearray(p.read_bytes())
    data[10] ^= 0x20
    p.write_bytes(bytes(data))
    assert run("resolve", "plip@1.0.0").exit_code == 5
    assert run("audit", "plip@1.0.0").exit_code == 5


def test_transport_exit(tmp_path, monkeypatch):
    monkeypatch.setenv("UMR_REGISTRY", "http://127.0.0.1:9")
    monkeypatch.chdir(tmp_path)
    r = CliRunner().invoke(main, ["resolve", "plip@1.0.0"])
    assert r.exit_code == 6


def test_no_registry_configured(tmp_path, monkeypatch):
    monkeypatch.delenv("UMR_REGISTRY", raising=False)
    monkeypatch.chdir(tmp_path)
    r = CliRunner().invoke(main, ["resolve", "plip@1.0.0"])
    assert r.exit_code == 2 and "no registry configured" in r.stderr


def test_config_file_ordering(tmp_path, monkeypatch, healthcare):
    private = init_local(tmp_path / "private")
    private.publish(make_record("plip", "5.0.0"))
    (tmp_path / "umr-config.yaml").write_text(
        f"sources:\n  - {{name: private, location: private}}\n  - {{name: public, location: '{healthcare.path}'}}\n"
    )
    monkeypatch.delenv("UMR_REGISTRY", raising=False)
    monkeypatch.chdir(tmp_path)
    r = CliRunner().invoke(main, ["resolve", "plip@5.0.0"])
    assert r.exit_code == 0 and r.stdout.splitlines() == ["plip@5.0.0"]
    assert "shadowed" in r.stderr
    r = CliRunner().invoke(main, ["--config", str(tmp_path / "umr-config.yaml"), "resolve", "plip@1.0.0"])
    assert r.exit_code == 4  # the private source owns plip, and it has no 1.0.0


def test_init_registry(tmp_path):
    r = CliRunner().invoke(main, ["init-registry", str(tmp_path / "fresh")])
    assert r.exit_code == 0 and (tmp_path / "fresh" / "index.umr.yaml").exists()


def test_remote_registry_round_trip(healthcare, tmp_path, monkeypatch):
    from helpers import LiveServer
    from umr.service import ServiceConfig, create_app

    app = create_app(ServiceConfig(data_dir=str(healthcare.path)), source=healthcare)
    with LiveServer(app) as live:
        (tmp_path / "umr-config.yaml").write_text(f"sources:\n  - {{name: hub, location: '{live.url}'}}\n")
        monkeypatch.delenv("UMR_REGISTRY", raising=False)
        monkeypatch.chdir(tmp_path)
        runner = CliRunner()
        f = write("remote.yaml", canonicalize(make_record("remote-ft", deps=[("plip", "model", "=1.0.0", "fine_tune")])))
        r = runner.invoke(main, ["publish", f])
        assert r.exit_code == 0, r.stderr
        healthcare.refresh()
        assert healthcare.index().get("remote-ft", "1.0.0") is not None
        assert runner.invoke(main, ["publish", f]).exit_code == 3
        r = runner.invoke(main, ["audit", "remote-ft@1.0.0"])
        assert r.exit_code == 1 and "remote-ft → plip → laion-5b" in r.stdout
