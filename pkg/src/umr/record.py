"""Unified model records: schema, parsing, validation and canonical form."""

from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

from umr import syntax
from umr.errors import ManifestSyntaxError, RecordError, VersionError, Violation
from umr.versioning import Version, VersionReq, parse_req, parse_version

log = logging.getLogger(__name__)

RECORD_FORMAT_VERSION = 1

KINDS = ("model", "dataset")
MODEL_RELATIONS = frozenset({"fine_tune", "adapter", "distillation", "component"})
DATA_RELATIONS = frozenset({"training_data", "retrieval_data", "evaluation_data"})
RELATIONS = (
    "fine_tune",
    "adapter",
    "distillation",
    "component",
    "training_data",
    "retrieval_data",
    "evaluation_data",
    "derived_from",
    "other",
)
# Relations a dataset record may use for its own upstream edges.
DATASET_RECORD_RELATIONS = frozenset({"derived_from", "other"})
ARTIFACT_KEYS = ("code", "training_data", "retrieval_data", "parameters")
AVAILABILITY = ("open", "gated", "api_only", "closed")

TOP_LEVEL_KEYS = (
    "record_format_version",
    "id",
    "version",
    "kind",
    "title",
    "publisher",
    "maintainers",
    "license",
    "artifacts",
    "dependencies",
    "evaluations",
    "intended_use",
    "ethical_notes",
    "references",
)
MANDATORY_KEYS = ("id", "version", "kind", "license", "record_format_version")

_TOKEN = re.compile(r"^[a-z0-9][a-z0-9._-]{0,127}$")
_LICENSE_TERM = r"[A-Za-z0-9][A-Za-z0-9.+-]*"
_LICENSE = re.compile(rf"^{_LICENSE_TERM}(?: (?:AND|OR|WITH) {_LICENSE_TERM})*$")
MAX_ID_LENGTH = 160


@dataclass(frozen=True, order=True)
class RecordId:
    namespace: Optional[str]
    name: str

    @classmethod
    def parse(cls, text: str) -> "RecordId":
        if not isinstance(text, str):
            raise ValueError(f"record id must be a string, got {type(text).__name__}")
        if len(text) > MAX_ID_LENGTH:
            raise ValueError(f"record id longer than {MAX_ID_LENGTH} characters")
        ns, sep, name = text.rpartition("/")
        if sep and not _TOKEN.match(ns):
            raise ValueError(f"invalid namespace {ns!r} in record id {text!r}")
        if not _TOKEN.match(name):
            raise ValueError(f"invalid record name {name!r} in record id {text!r}")
        return cls(ns if sep else None, name)

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.name, str) or not _TOKEN.match(self.name):
            out.append(f"invalid record name {self.name!r}")
        if self.namespace is not None and (not isinstance(self.namespace, str) or not _TOKEN.match(self.namespace)):
            out.append(f"invalid namespace {self.namespace!r}")
        if not out and len(str(self)) > MAX_ID_LENGTH:
            out.append(f"record id longer than {MAX_ID_LENGTH} characters")
        return out

    def __str__(self) -> str:
        return f"{self.namespace}/{self.name}" if self.namespace else self.name


def as_record_id(value: RecordId | str) -> RecordId:
    return value if isinstance(value, RecordId) else RecordId.parse(value)


@dataclass(frozen=True)
class Maintainer:
    name: str
    contact: Optional[str] = None


@dataclass(frozen=True)
class Artifact:
    availability: str
    url: Optional[str] = None


@dataclass(frozen=True)
class DependencyRef:
    target: RecordId
    kind: str
    req: VersionReq
    relation: str
    note: Optional[str] = None

    def sort_key(self) -> tuple:
        return (str(self.target), self.relation, self.kind, self.req.text)


@dataclass(frozen=True)
class EvaluationResult:
    metric: str
    value: Optional[float] = None
    higher_is_better: bool = True
    dataset: Optional[RecordId] = None
    qualitative: Optional[str] = None
    protocol: Optional[str] = None


@dataclass(frozen=True)
class ModelRecord:
    """One version of a model or dataset.

    Dependencies are kept sorted by (target, relation, kind, req) so that in-memory
    records compare equal to their canonical round-trip. ``extra`` holds
    unrecognized top-level keys verbatim.
    """

    id: RecordId
    version: Version
    kind: str
    license: str
    record_format_version: int = RECORD_FORMAT_VERSION
    title: str = ""
    publisher: str = ""
    maintainers: tuple[Maintainer, ...] = ()
    artifacts: Mapping[str, Artifact] = field(default_factory=dict)
    dependencies: tuple[DependencyRef, ...] = ()
    evaluations: tuple[EvaluationResult, ...] = ()
    intended_use: str = ""
    ethical_notes: str = ""
    references: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "maintainers", tuple(self.maintainers))
        object.__setattr__(self, "evaluations", tuple(self.evaluations))
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "dependencies", tuple(sorted(self.dependencies, key=DependencyRef.sort_key)))
        object.__setattr__(self, "artifacts", dict(self.artifacts))
        object.__setattr__(self, "extra", dict(self.extra))

    __hash__ = None  # mutable mapping fields

    @property
    def ref(self) -> str:
        return f"{self.id}@{self.version}"


# -- tree conversion ---------------------------------------------------------


def to_tree(record: ModelRecord) -> dict:
    """Plain dict/list/scalar form, with every top-level key present."""
    def opt(d: dict, key: str, value) -> dict:
        if value is not None:
            d[key] = value
        return d

    tree = dict(record.extra)
    tree.update(
        record_format_version=record.record_format_version,
        id=str(record.id),
        version=str(record.version),
        kind=record.kind,
        title=record.title,
        publisher=record.publisher,
        maintainers=[opt({"name": m.name}, "contact", m.contact) for m in record.maintainers],
        license=record.license,
        artifacts={
            k: opt({"availability": a.availability}, "url", a.url) for k, a in record.artifacts.items()
        },
        dependencies=[
            opt(
                {"target": str(d.target), "kind": d.kind, "req": d.req.text, "relation": d.relation},
                "note",
                d.note,
            )
            for d in record.dependencies
        ],
        evaluations=[_evaluation_tree(e) for e in record.evaluations],
        intended_use=record.intended_use,
        ethical_notes=record.ethical_notes,
        references=list(record.references),
    )
    return tree


def _evaluation_tree(e: EvaluationResult) -> dict:
    out: dict = {"metric": e.metric, "higher_is_better": e.higher_is_better}
    if e.value is not None:
        out["value"] = float(e.value)
    if e.dataset is not None:
        out["dataset"] = str(e.dataset)
    if e.qualitative is not None:
        out["qualitative"] = e.qualitative
    if e.protocol is not None:
        out["protocol"] = e.protocol
    return out


class _Collector:
    def __init__(self):
        self.violations: list[Violation] = []

    def error(self, path: str, message: str) -> None:
        self.violations.append(Violation("error", path, message))

    @property
    def failed(self) -> bool:
        return any(v.severity == "error" for v in self.violations)


def _text(c: _Collector, tree: Mapping, key: str, path: str, required: bool = False) -> Optional[str]:
    if key not in tree or tree[key] is None:
        if required:
            c.error(path, "missing required field")
        return None
    value = tree[key]
    if not isinstance(value, str):
        c.error(path, f"expected a string, got {type(value).__name__}")
        return None
    return value


def _check_keys(c: _Collector, tree: Mapping, allowed: tuple, path: str) -> None:
    for k in tree:
        if k not in allowed:
            c.error(f"{path}.{k}", "unknown field")


def _list(c: _Collector, tree: Mapping, key: str) -> list:
    value = tree.get(key)
    if value is None:
        return []
    if not isinstance(value, list):
        c.error(key, f"expected a list, got {type(value).__name__}")
        return []
    return value


def _record_id(c: _Collector, value: Any, path: str) -> Optional[RecordId]:
    try:
        return RecordId.parse(value)
    except ValueError as exc:
        c.error(path, str(exc))
        return None


def from_tree(tree: Any) -> ModelRecord:
    """Build a record from a parsed manifest tree; raise RecordError on schema errors."""
    c = _Collector()
    if not isinstance(tree, dict):
        raise RecordError([Violation("error", "", "manifest must be a mapping at the top level")])

    for key in MANDATORY_KEYS:
        if key not in tree or tree[key] is None:
            c.error(key, "missing mandatory field")

    rid = _record_id(c, tree["id"], "id") if tree.get("id") is not None else None

    version = None
    if tree.get("version") is not None:
        try:
            version = parse_version(tree["version"])
        except VersionError as exc:
            c.error("version", str(exc))

    kind = _text(c, tree, "kind", "kind")
    if kind is not None and kind not in KINDS:
        c.error("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")

    license_ = _text(c, tree, "license", "license")

    rfv = tree.get("record_format_version")
    if rfv is not None and (isinstance(rfv, bool) or not isinstance(rfv, int)):
        c.error("record_format_version", f"expected an integer, got {type(rfv).__name__}")
        rfv = None

    texts = {}
    for key in ("title", "publisher", "intended_use", "ethical_notes"):
        texts[key] = _text(c, tree, key, key) or ""

    maintainers = []
    for i, m in enumerate(_list(c, tree, "maintainers")):
        path = f"maintainers[{i}]"
        if isinstance(m, str):
            maintainers.append(Maintainer(m))
        elif isinstance(m, dict):
            _check_keys(c, m, ("name", "contact"), path)
            name = _text(c, m, "name", f"{path}.name", required=True)
            contact = _text(c, m, "contact", f"{path}.contact")
            if name is not None:
                maintainers.append(Maintainer(name, contact))
        else:
            c.error(path, "expected a mapping with name/contact")

    artifacts = {}
    raw_artifacts = tree.get("artifacts")
    if raw_artifacts is None:
        raw_artifacts = {}
    if not isinstance(raw_artifacts, dict):
        c.error("artifacts", "expected a mapping")
        raw_artifacts = {}
    for k, a in raw_artifacts.items():
        path = f"artifacts.{k}"
        if isinstance(a, str):
            artifacts[k] = Artifact(a)
        elif isinstance(a, dict):
            _check_keys(c, a, ("availability", "url"), path)
            avail = _text(c, a, "availability", f"{path}.availability", required=True)
            url = _text(c, a, "url", f"{path}.url")
            if avail is not None:
                artifacts[k] = Artifact(avail, url)
        else:
            c.error(path, "expected an availability string or a mapping")

    deps = []
    for i, d in enumerate(_list(c, tree, "dependencies")):
        path = f"dependencies[{i}]"
        if not isinstance(d, dict):
            c.error(path, "expected a mapping")
            continue
        _check_keys(c, d, ("target", "kind", "req", "relation", "note"), path)
        target_text = _text(c, d, "target", f"{path}.target", required=True)
        target = _record_id(c, target_text, f"{path}.target") if target_text is not None else None
        dkind = _text(c, d, "kind", f"{path}.kind", required=True)
        relation = _text(c, d, "relation", f"{path}.relation", required=True)
        req_text = _text(c, d, "req", f"{path}.req", required=True)
        note = _text(c, d, "note", f"{path}.note")
        req = None
        if req_text is not None:
            try:
                req = parse_req(req_text)
            except VersionError as exc:
                c.error(f"{path}.req", str(exc))
        if None not in (target, dkind, relation, req):
            deps.append(DependencyRef(target, dkind, req, relation, note))

    evaluations = []
    for i, e in enumerate(_list(c, tree, "evaluations")):
        path = f"evaluations[{i}]"
        if not isinstance(e, dict):
            c.error(path, "expected a mapping")
            continue
        _check_keys(c, e, ("metric", "value", "higher_is_better", "dataset", "qualitative", "protocol"), path)
        metric = _text(c, e, "metric", f"{path}.metric", required=True)
        value = e.get("value")
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            c.error(f"{path}.value", f"expected a number, got {type(value).__name__}")
            value = None
        hib = e.get("higher_is_better", True)
        if not isinstance(hib, bool):
            c.error(f"{path}.higher_is_better", "expected true or false")
            hib = True
        ds_text = _text(c, e, "dataset", f"{path}.dataset")
        ds = _record_id(c, ds_text, f"{path}.dataset") if ds_text is not None else None
        qual = _text(c, e, "qualitative", f"{path}.qualitative")
        proto = _text(c, e, "protocol", f"{path}.protocol")
        if metric is not None:
            evaluations.append(
                EvaluationResult(metric, None if value is None else float(value), hib, ds, qual, proto)
            )

    references = []
    for i, r in enumerate(_list(c, tree, "references")):
        if isinstance(r, str):
            references.append(r)
        else:
            c.error(f"references[{i}]", "expected a string")

    if c.failed:
        raise RecordError(c.violations)

    extra = {k: v for k, v in tree.items() if k not in TOP_LEVEL_KEYS}
    return ModelRecord(
        id=rid,
        version=version,
        kind=kind,
        license=license_,
        record_format_version=rfv,
        maintainers=maintainers,
        artifacts=artifacts,
        dependencies=deps,
        evaluations=evaluations,
        references=references,
        extra=extra,
        **texts,
    )


def parse_record(data: bytes | str) -> ModelRecord:
    """Parse manifest text into a validated record.

    Raises :class:`ManifestSyntaxError` for malformed text and
    :class:`RecordError` for schema or invariant violations. Warning-level
    findings are logged, not raised.
    """
    tree = syntax.load(data)
    if tree is None:
        raise RecordError([Violation("error", "", "empty manifest")])
    record = from_tree(tree)
    violations = validate(record)
    if any(v.severity == "error" for v in violations):
        raise RecordError(violations)
    for v in violations:
        if v.path in record.extra:
            log.warning("%s: %s", v.path, v.message)
    return record


# -- validation --------------------------------------------------------------


def _has_surrogate(s: str) -> bool:
    return any(0xD800 <= ord(ch) <= 0xDFFF for ch in s)


def _scan_text(value: Any, path: str, out: list[Violation]) -> None:
    if isinstance(value, str):
        if _has_surrogate(value):
            out.append(Violation("error", path, "text contains unpaired surrogate code points"))
    elif isinstance(value, dict):
        for k, v in value.items():
            _scan_text(k, path, out)
            _scan_text(v, f"{path}.{k}", out)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _scan_text(v, f"{path}[{i}]", out)
    elif isinstance(value, float) and not math.isfinite(value):
        out.append(Violation("error", path, "non-finite number"))
    elif value is not None and not isinstance(value, (bool, int, float)):
        out.append(Violation("error", path, f"unsupported value type {type(value).__name__}"))


def validate(record: ModelRecord) -> list[Violation]:
    """All invariant violations of ``record``; empty iff it is publishable and clean."""
    out: list[Violation] = []

    def err(path, msg):
        out.append(Violation("error", path, msg))

    def warn(path, msg):
        out.append(Violation("warning", path, msg))

    if not isinstance(record.id, RecordId):
        err("id", "missing or invalid record id")
    else:
        for p in record.id.problems():
            err("id", p)
    if not isinstance(record.version, Version):
        err("version", "missing or invalid version")
    if record.kind not in KINDS:
        err("kind", f"must be one of {', '.join(KINDS)}, got {record.kind!r}")
    if not isinstance(record.license, str) or not record.license:
        err("license", "missing mandatory field")
    elif not _LICENSE.match(record.license):
        err("license", f"not an SPDX-style identifier: {record.license!r}")
    elif record.license == "unknown":
        warn("license", "license is unknown")
    if record.record_format_version != RECORD_FORMAT_VERSION:
        err("record_format_version", f"unsupported record format version {record.record_format_version!r}")

    for key in record.artifacts:
        a = record.artifacts[key]
        if key not in ARTIFACT_KEYS:
            err(f"artifacts.{key}", f"unknown artifact; expected one of {', '.join(ARTIFACT_KEYS)}")
        if a.availability not in AVAILABILITY:
            err(f"artifacts.{key}.availability", f"must be one of {', '.join(AVAILABILITY)}, got {a.availability!r}")

    for i, m in enumerate(record.maintainers):
        if not m.name:
            err(f"maintainers[{i}].name", "maintainer name is empty")

    seen = {}
    for i, d in enumerate(record.dependencies):
        path = f"dependencies[{i}]"
        if d.kind not in KINDS:
            err(f"{path}.kind", f"must be one of {', '.join(KINDS)}, got {d.kind!r}")
        if d.relation not in RELATIONS:
            err(f"{path}.relation", f"unknown relation {d.relation!r}")
        elif d.relation in DATA_RELATIONS and d.kind != "dataset":
            err(f"{path}.relation", f"relation {d.relation} requires a dataset target")
        elif d.relation in MODEL_RELATIONS and d.kind != "model":
            err(f"{path}.relation", f"relation {d.relation} requires a model target")
        elif d.kind == "dataset" and d.relation not in DATA_RELATIONS | DATASET_RECORD_RELATIONS:
            err(f"{path}.relation", f"relation {d.relation} cannot target a dataset")
        if record.kind == "dataset" and d.relation not in DATASET_RECORD_RELATIONS:
            err(f"{path}.relation", "dataset records may depend on others only via derived_from or other")
        if isinstance(record.id, RecordId) and d.target == record.id:
            err(f"{path}.target", "record depends on itself")
        if d.req.is_empty():
            err(f"{path}.req", f"requirement {d.req} matches no version")
        triple = (d.target, d.kind, d.relation)
        if triple in seen:
            err("dependencies", f"duplicate dependency on {d.target} ({d.kind}, {d.relation}) "
                f"at indexes {seen[triple]} and {i}")
        else:
            seen[triple] = i

    for i, e in enumerate(record.evaluations):
        path = f"evaluations[{i}]"
        if not e.metric:
            err(f"{path}.metric", "metric is empty")
        if e.value is not None and not math.isfinite(e.value):
            err(f"{path}.value", "value must be finite")
        if e.value is None and not e.qualitative:
            err(path, "result needs a value or a qualitative description")

    try:
        tree = to_tree(record)
    except (AttributeError, TypeError):
        tree = {}
    for key, value in tree.items():
        _scan_text(value, key, out)
    for k in record.extra:
        warn(k, "unknown top-level field preserved verbatim")

    for key in ("title", "publisher", "intended_use", "ethical_notes"):
        if not getattr(record, key):
            warn(key, "field is empty")
    if not record.maintainers:
        warn("maintainers", "no maintainers listed")
    if not record.artifacts:
        warn("artifacts", "artifact availability not declared")
    if not record.references:
        warn("references", "no references")
    if record.kind == "model" and not record.evaluations:
        warn("evaluations", "no evaluation results")
    return out


def errors_of(violations: list[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


# -- canonical form ------------------------------------------------------------


def canonicalize(record: ModelRecord) -> bytes:
    violations = validate(record)
    if errors_of(violations):
        raise RecordError(violations)
    return syntax.dump(to_tree(record))


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(record: ModelRecord) -> str:
    return digest_bytes(canonicalize(record))


# -- derivation ----------------------------------------------------------------


def derive_record(upstream: ModelRecord, overrides: Mapping[str, Any], relation: str) -> ModelRecord:
    """New record built on ``upstream`` with a dependency edge back to it.

    Descriptive fields are inherited as defaults; license, publisher,
    maintainers and evaluations never are.
    """
    if relation in DATA_RELATIONS:
        raise ValueError(f"relation {relation} is a dataset relation; derivation needs a model relation")
    if relation not in MODEL_RELATIONS:
        raise ValueError(f"relation must be one of {', '.join(sorted(MODEL_RELATIONS))}, got {relation!r}")
    if upstream.kind != "model":
        raise ValueError(f"cannot derive a model from {upstream.kind} {upstream.ref} via {relation}")
    if errors_of(validate(upstream)):
        raise RecordError(validate(upstream))
    missing = [k for k in ("id", "version") if overrides.get(k) is None]
    if missing:
        raise ValueError(f"overrides missing {', '.join(missing)}")
    unknown = set(overrides) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise ValueError(f"unknown override fields: {', '.join(sorted(unknown))}")

    fields = dict(overrides)
    fields["id"] = as_record_id(fields["id"])
    if isinstance(fields["version"], str):
        fields["version"] = parse_version(fields["version"])

    edge = DependencyRef(upstream.id, "model", parse_req(f"={upstream.version}"), relation)
    inherited = tuple(fields.pop("dependencies", ()))
    if any((d.target, d.kind, d.relation) == (edge.target, edge.kind, edge.relation) for d in inherited):
        raise ValueError(f"overrides already declare {relation} on {upstream.id}")

    note = f"Derived from {upstream.ref} via {relation}"
    base = ModelRecord(
        id=fields.pop("id"),
        version=fields.pop("version"),
        kind=fields.pop("kind", "model"),
        license=fields.pop("license", "unknown"),
        title=fields.pop("title", f"{upstream.title} ({relation.replace('_', '-')})" if upstream.title else ""),
        publisher=fields.pop("publisher", ""),
        maintainers=fields.pop("maintainers", ()),
        artifacts=fields.pop("artifacts", upstream.artifacts),
        dependencies=inherited + (edge,),
        evaluations=fields.pop("evaluations", ()),
        intended_use=fields.pop("intended_use", upstream.intended_use),
        ethical_notes=fields.pop("ethical_notes", upstream.ethical_notes),
        references=tuple(fields.pop("references", ())) + (note,),
    )
    return replace(base, **fields) if fields else base


def load_record_file(path) -> ModelRecord:
    with open(path, "rb") as fh:
        return parse_record(fh.read())


__all__ = [
    "RecordId",
    "Maintainer",
    "Artifact",
    "DependencyRef",
    "EvaluationResult",
    "ModelRecord",
    "parse_record",
    "from_tree",
    "to_tree",
    "validate",
    "canonicalize",
    "digest",
    "digest_bytes",
    "derive_record",
    "ManifestSyntaxError",
]
