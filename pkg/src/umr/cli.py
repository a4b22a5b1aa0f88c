"""``umr`` command-line interface.

Exit codes: 0 success, 1 audit findings, 2 usage error, 3 validation error,
4 resolution error (cycle or missing record), 5 integrity error, 6 transport
error.
"""

from __future__ import annotations

import functools
import sys
import warnings
from pathlib import Path
from typing import Optional

import click
import httpx

from umr.advisory import AdvisoryDatabase, audit, load_advisories, stakeholders
from umr.errors import (
    AdvisoryError,
    CycleError,
    ImmutableVersionError,
    IntegrityError,
    ManifestSyntaxError,
    NotFoundError,
    RecordError,
    RegistryError,
    ResolutionError,
    TransportError,
    UMRWarning,
    VersionError,
)
from umr.graph import build_graph, topo_order
from umr.record import RELATIONS, ModelRecord, RecordId, canonicalize, derive_record, parse_record, validate
from umr.registry import HttpSource, LocalSource, init_local, view_from_environment
from umr.render import RenderTarget, render_record, render_report
from umr.versioning import parse_req, parse_version

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RESOLUTION = 4
EXIT_INTEGRITY = 5
EXIT_TRANSPORT = 6


def err(message: str) -> None:
    click.echo(message, err=True)


def _exit_code(exc: BaseException) -> tuple[int, str]:
    # Order matters: subclasses before their bases.
    if isinstance(exc, IntegrityError):
        return EXIT_INTEGRITY, f"integrity error: {exc}"
    if isinstance(exc, TransportError):
        return EXIT_TRANSPORT, f"transport error: {exc}"
    if isinstance(exc, CycleError):
        return EXIT_RESOLUTION, f"resolution error: cycle {' -> '.join(str(n) for n in exc.cycle)}"
    if isinstance(exc, (ResolutionError, NotFoundError)):
        return EXIT_RESOLUTION, f"resolution error: {exc}"
    if isinstance(exc, ImmutableVersionError):
        return EXIT_VALIDATION, f"error: {exc}"
    if isinstance(exc, RecordError):
        lines = "\n".join(f"  {v}" for v in exc.violations)
        return EXIT_VALIDATION, f"validation error:\n{lines}"
    if isinstance(exc, (ManifestSyntaxError, AdvisoryError)):
        return EXIT_VALIDATION, f"validation error: {exc}"
    if isinstance(exc, (RegistryError, VersionError, ValueError)):
        return EXIT_USAGE, f"error: {exc}"
    raise exc


def handled(fn):
    """Map package errors to exit codes and surface warnings on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", UMRWarning)
            try:
                code = fn(*args, **kwargs) or EXIT_OK
            except click.exceptions.Exit:
                raise
            except click.ClickException:
                raise
            except Exception as exc:  # noqa: BLE001
                code, message = _exit_code(exc)
                _flush(caught)
                err(message)
                sys.exit(code)
        _flush(caught)
        sys.exit(code)

    return wrapper


def _flush(caught) -> None:
    for w in caught:
        if issubclass(w.category, UMRWarning):
            err(f"warning: {w.message}")


def split_ref(ref: str) -> tuple[RecordId, str]:
    rid, sep, version = ref.rpartition("@")
    if not sep or not rid or not version:
        raise click.BadParameter(f"expected <id>@<version>, got {ref!r}")
    try:
        return RecordId.parse(rid), version
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _view(ctx: click.Context):
    return view_from_environment(ctx.obj.get("config"))


def _fetch_root(view, ref: str) -> ModelRecord:
    rid, version = split_ref(ref)
    try:
        v = parse_version(version)
    except VersionError as exc:
        raise click.BadParameter(str(exc)) from exc
    return view.fetch(rid, v)


@click.group()
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
              help="View configuration file (default: ./umr-config.yaml).")
@click.version_option(package_name="artifact", prog_name="umr")
@click.pass_context
def main(ctx: click.Context, config: Optional[str]) -> None:
    """Unified model records: publish, resolve and audit model provenance."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@main.command("init")
@click.option("--from", "upstream", metavar="ID@VERSION", help="Derive from an upstream record.")
@click.option("--relation", type=click.Choice(RELATIONS), default="fine_tune", show_default=True)
@click.option("--kind", type=click.Choice(["model", "dataset"]), default="model", show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
@click.argument("record_id")
@click.argument("version")
@click.pass_context
@handled
def init_cmd(ctx, upstream, relation, kind, output, record_id, version):
    """Write a scaffold manifest for RECORD_ID at VERSION."""
    rid = RecordId.parse(record_id)
    v = parse_version(version)
    path = Path(output or f"{rid.name}-{v}.umr.yaml")
    if path.exists():
        err(f"error: {path} already exists")
        return EXIT_USAGE
    if upstream:
        view = _view(ctx)
        up = _fetch_root(view, upstream)
        try:
            record = derive_record(up, {"id": rid, "version": v, "kind": kind}, relation)
        except ValueError as exc:
            err(f"error: {exc}")
            return EXIT_USAGE
    else:
        record = ModelRecord(id=rid, version=v, kind=kind, license="unknown")
    path.write_bytes(canonicalize(record))
    click.echo(str(path))


@main.command("validate")
@click.option("--strict", is_flag=True, help="Treat warnings as errors.")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@handled
def validate_cmd(strict, file):
    """Check a manifest file against the record schema."""
    record = parse_record(Path(file).read_bytes())
    violations = validate(record)
    for v in violations:
        click.echo(str(v))
    if strict and violations:
        return EXIT_VALIDATION
    click.echo(f"ok: {record.ref}")


@main.command("resolve")
@click.option("--allow-missing", is_flag=True, help="Keep unresolvable dependencies as unresolved leaves.")
@click.argument("ref", metavar="ID@VERSION")
@click.pass_context
@handled
def resolve_cmd(ctx, allow_missing, ref):
    """Print the provenance graph of a record in topological order."""
    view = _view(ctx)
    root = _fetch_root(view, ref)
    graph = build_graph(root, view, allow_missing=allow_missing)
    for n in topo_order(graph):
        click.echo(str(n))


def _load_advisory_source(location: str) -> AdvisoryDatabase:
    if location.startswith(("http://", "https://")):
        try:
            resp = httpx.get(location, timeout=10.0)
        except httpx.TransportError as exc:
            raise TransportError(f"GET {location} failed: {exc}") from exc
        if resp.status_code != 200:
            raise RegistryError(f"GET {location} returned {resp.status_code}")
        return load_advisories(resp.content)
    return load_advisories(Path(location).read_bytes())


_REPORT_FORMATS = {"md": "markdown", "markdown": "markdown", "html": "html", "latex": "latex", "umr": "umr"}


@main.command("audit")
@click.option("--advisories", "advisories", metavar="FILE|URL", help="Advisory file or URL (default: from the view).")
@click.option("--format", "fmt", type=click.Choice(sorted(_REPORT_FORMATS)), default="md", show_default=True)
@click.option("--warn-only", is_flag=True, help="Exit 0 even when findings exist.")
@click.argument("ref", metavar="ID@VERSION")
@click.pass_context
@handled
def audit_cmd(ctx, advisories, fmt, warn_only, ref):
    """Audit a record's provenance graph against advisories."""
    view = _view(ctx)
    root = _fetch_root(view, ref)
    db = _load_advisory_source(advisories) if advisories else view.advisories()
    report = audit(root, view, db)
    click.echo(render_report(report, RenderTarget(_REPORT_FORMATS[fmt])).decode("utf-8"), nl=False)
    if report.findings and not warn_only:
        return EXIT_FINDINGS


@main.command("impact")
@click.option("--include-target", is_flag=True, help="Also list records matching the target itself.")
@click.argument("target", metavar="ID[@RANGE]")
@click.pass_context
@handled
def impact_cmd(ctx, include_target, target):
    """List downstream records (and maintainer contacts) affected by TARGET."""
    rid_text, sep, range_text = target.partition("@")
    rid = RecordId.parse(rid_text)
    req = parse_req(range_text) if sep else None
    view = _view(ctx)
    for n in stakeholders(view.records(), rid, req):
        if n.role == "target" and not include_target:
            continue
        contacts = ", ".join(n.contacts) if n.contacts else "-"
        suffix = "\t(target)" if n.role == "target" else ""
        click.echo(f"{n.id}@{n.version}\t{contacts}{suffix}")


@main.command("render")
@click.option("--format", "fmt", type=click.Choice(["markdown", "html", "latex", "dot"]), required=True)
@click.option("-o", "--output", default="-", show_default=True, help="Output path, '-' for standard output.")
@click.option("--graph/--no-graph", "include_graph", default=True, show_default=True)
@click.option("--max-depth", type=click.IntRange(min=1), default=None)
@click.option("--flip/--no-flip", "flip", default=True, show_default=True,
              help="Draw arrows from upstream to downstream.")
@click.argument("ref", metavar="ID@VERSION")
@click.pass_context
@handled
def render_cmd(ctx, fmt, output, include_graph, max_depth, flip, ref):
    """Render a record (and its provenance graph) to a document format."""
    view = _view(ctx)
    root = _fetch_root(view, ref)
    graph = build_graph(root, view, allow_missing=True) if include_graph or fmt == "dot" else None
    target = RenderTarget(fmt, include_graph=include_graph, max_depth=max_depth, flip_arrows=flip)
    data = render_record(root, graph, target)
    if output == "-":
        click.echo(data.decode("utf-8"), nl=False)
    else:
        Path(output).write_bytes(data)
        click.echo(output)


def _target_source(view, name: Optional[str]):
    return view.source(name) if name else view.sources[0]


@main.command("publish")
@click.option("--to", "to", metavar="SOURCE", help="Source name from the view (default: the first source).")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handled
def publish_cmd(ctx, to, file):
    """Publish a manifest to a registry source."""
    record = parse_record(Path(file).read_bytes())
    source = _target_source(_view(ctx), to)
    result = source.publish(record)
    if isinstance(source, HttpSource):
        digest = result["digest"]
    else:
        digest = result.get(record.id, record.version).digest
    click.echo(f"published {record.ref} to {source.name}")
    click.echo(digest)


@main.command("yank")
@click.option("--from", "from_", metavar="SOURCE", help="Source name (default: the source owning the id).")
@click.argument("ref", metavar="ID@VERSION")
@click.pass_context
@handled
def yank_cmd(ctx, from_, ref):
    """Mark a published version as yanked without deleting it."""
    view = _view(ctx)
    rid, version = split_ref(ref)
    source = view.source(from_) if from_ else view.owner(rid)
    if source is None:
        raise NotFoundError(f"{rid} not found in any source")
    source.yank(rid, parse_version(version))
    click.echo(f"yanked {rid}@{version} in {source.name}")


@main.command("init-registry")
@click.argument("directory", type=click.Path(file_okay=False))
@handled
def init_registry_cmd(directory):
    """Create an empty local registry in DIRECTORY."""
    source = init_local(directory)
    click.echo(str(source.path))


@main.command("serve")
@click.option("--read-only", is_flag=True)
@click.option("--bind", default="127.0.0.1:8000", show_default=True, metavar="ADDR:PORT")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), default=None,
              help="Registry directory (default: first local source of the view, else '.').")
@click.option("--max-body-bytes", type=click.IntRange(min=1), default=1_048_576, show_default=True)
@click.pass_context
@handled
def serve_cmd(ctx, read_only, bind, data_dir, max_body_bytes):
    """Run the HTTP registry service until interrupted."""
    from umr.service import ServiceConfig, serve

    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise click.BadParameter(f"expected ADDR:PORT, got {bind!r}", param_hint="--bind")
    if data_dir is None:
        data_dir = "."
        try:
            local = [s for s in _view(ctx).sources if isinstance(s, LocalSource)]
            if local:
                data_dir = local[0].location
        except RegistryError:
            pass
    serve(
        ServiceConfig(
            host=host or "127.0.0.1",
            port=int(port),
            data_dir=data_dir,
            read_only=read_only,
            max_body_bytes=max_body_bytes,
        )
    )


if __name__ == "__main__":
    main()
