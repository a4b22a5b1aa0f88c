"""Advisories against models and datasets, and audits of provenance graphs."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from umr import syntax
from umr.errors import AdvisoryError, VersionError
from umr.graph import NodeKey, ProvenanceGraph, Resolver, all_paths, build_graph, downstream_impact, target_matcher
from umr.record import KINDS, ModelRecord, RecordId, digest_bytes
from umr.versioning import VersionReq, matches, parse_req

CATEGORIES = ("csam", "privacy", "license_change", "legal", "bias", "toxicity", "security", "other")
SEVERITIES = ("low", "medium", "high", "critical")
SEVERITY_RANK = {s: i for i, s in enumerate(SEVERITIES)}
MAX_PATHS = 64

_ADVISORY_ID = re.compile(r"^UMR-[0-9]{4}-[0-9]{4,}$")
_FIELDS = (
    "advisory_id",
    "target_id",
    "target_kind",
    "affected",
    "category",
    "severity",
    "published",
    "withdrawn",
    "summary",
    "references",
)


@dataclass(frozen=True)
class Advisory:
    advisory_id: str
    target_id: RecordId
    target_kind: str
    affected: VersionReq
    category: str
    severity: str
    published: dt.date
    summary: str
    withdrawn: Optional[dt.date] = None
    references: tuple[str, ...] = ()

    @property
    def active(self) -> bool:
        return self.withdrawn is None

    def to_tree(self) -> dict:
        tree = {
            "advisory_id": self.advisory_id,
            "target_id": str(self.target_id),
            "target_kind": self.target_kind,
            "affected": self.affected.text,
            "category": self.category,
            "severity": self.severity,
            "published": self.published.isoformat(),
            "summary": self.summary,
            "references": list(self.references),
        }
        if self.withdrawn is not None:
            tree["withdrawn"] = self.withdrawn.isoformat()
        return tree


def _date(value: Any, path: str) -> dt.date:
    if isinstance(value, dt.date):
        return value
    if not isinstance(value, str):
        raise AdvisoryError(f"{path}: expected an ISO-8601 date, got {value!r}")
    try:
        return dt.date.fromisoformat(value)
    except ValueError as exc:
        raise AdvisoryError(f"{path}: expected an ISO-8601 date, got {value!r}") from exc


def advisory_from_tree(tree: Any, path: str = "advisory") -> Advisory:
    if not isinstance(tree, dict):
        raise AdvisoryError(f"{path}: expected a mapping")
    unknown = set(tree) - set(_FIELDS)
    if unknown:
        raise AdvisoryError(f"{path}: unknown fields {', '.join(sorted(unknown))}")
    for key in ("advisory_id", "target_id", "target_kind", "affected", "category", "severity", "published", "summary"):
        if tree.get(key) is None:
            raise AdvisoryError(f"{path}.{key}: missing required field")
        if key != "published" and not isinstance(tree[key], str):
            raise AdvisoryError(f"{path}.{key}: expected a string")
    aid = tree["advisory_id"]
    if not _ADVISORY_ID.match(aid):
        raise AdvisoryError(f"{path}.advisory_id: expected UMR-YYYY-NNNN, got {aid!r}")
    try:
        target = RecordId.parse(tree["target_id"])
    except ValueError as exc:
        raise AdvisoryError(f"{path}.target_id: {exc}") from exc
    if tree["target_kind"] not in KINDS:
        raise AdvisoryError(f"{path}.target_kind: must be one of {', '.join(KINDS)}")
    try:
        affected = parse_req(tree["affected"])
    except VersionError as exc:
        raise AdvisoryError(f"{path}.affected: {exc}") from exc
    if tree["category"] not in CATEGORIES:
        raise AdvisoryError(f"{path}.category: must be one of {', '.join(CATEGORIES)}")
    if tree["severity"] not in SEVERITIES:
        raise AdvisoryError(f"{path}.severity: must be one of {', '.join(SEVERITIES)}")
    published = _date(tree["published"], f"{path}.published")
    withdrawn = None
    if tree.get("withdrawn") is not None:
        withdrawn = _date(tree["withdrawn"], f"{path}.withdrawn")
        if withdrawn < published:
            raise AdvisoryError(f"{path}.withdrawn: earlier than published date")
    if not tree["summary"].strip():
        raise AdvisoryError(f"{path}.summary: must not be empty")
    refs = tree.get("references") or []
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise AdvisoryError(f"{path}.references: expected a list of strings")
    return Advisory(
        aid, target, tree["target_kind"], affected, tree["category"], tree["severity"],
        published, tree["summary"], withdrawn, tuple(refs),
    )


@dataclass(frozen=True)
class AdvisoryDatabase:
    advisories: tuple[Advisory, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.advisories, key=lambda a: a.advisory_id))
        ids = [a.advisory_id for a in ordered]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise AdvisoryError(f"duplicate advisory id {', '.join(dupes)}")
        object.__setattr__(self, "advisories", ordered)

    def __iter__(self):
        return iter(self.advisories)

    def __len__(self) -> int:
        return len(self.advisories)

    def active(self) -> list[Advisory]:
        return [a for a in self.advisories if a.active]

    def get(self, advisory_id: str) -> Optional[Advisory]:
        return next((a for a in self.advisories if a.advisory_id == advisory_id), None)

    def since(self, day: Optional[dt.date]) -> list[Advisory]:
        return [a for a in self.active() if day is None or a.published >= day]

    def canonical(self) -> bytes:
        return serialize_advisories(self.advisories)

    @property
    def digest(self) -> str:
        return digest_bytes(self.canonical())

    def merged(self, other: "AdvisoryDatabase") -> "AdvisoryDatabase":
        """Union where advisories already present here win over ``other``."""
        ids = {a.advisory_id for a in self.advisories}
        return AdvisoryDatabase(self.advisories + tuple(a for a in other if a.advisory_id not in ids))


def serialize_advisories(advisories: Iterable[Advisory]) -> bytes:
    return syntax.dump([a.to_tree() for a in sorted(advisories, key=lambda a: a.advisory_id)])


def load_advisories(data: bytes | str) -> AdvisoryDatabase:
    """Parse an advisory file: a list of advisory mappings (empty file allowed)."""
    tree = syntax.load(data)
    if tree is None:
        return AdvisoryDatabase()
    if not isinstance(tree, list):
        raise AdvisoryError("advisory file must contain a list of advisories")
    return AdvisoryDatabase(tuple(advisory_from_tree(t, f"advisories[{i}]") for i, t in enumerate(tree)))


def matches_advisory(a: Advisory, n: NodeKey) -> bool:
    """Whether an active advisory applies to a node.

    Unresolved nodes (no version) match on id and kind alone.
    """
    if not a.active or a.target_id != n.id or a.target_kind != n.kind:
        return False
    return n.version is None or matches(a.affected, n.version)


# -- audits ------------------------------------------------------------------


@dataclass(frozen=True)
class AuditFinding:
    advisory: Advisory
    matched_node: NodeKey
    paths: tuple[tuple[NodeKey, ...], ...]
    truncated: bool = False

    def sort_key(self) -> tuple:
        return (-SEVERITY_RANK[self.advisory.severity], self.advisory.advisory_id, self.matched_node.sort_key())


@dataclass(frozen=True)
class AuditReport:
    root: NodeKey
    findings: tuple[AuditFinding, ...]
    generated_at: str
    advisory_db_digest: str
    unresolved: tuple[NodeKey, ...] = field(default=())

    @property
    def clean(self) -> bool:
        return not self.findings

    def to_tree(self) -> dict:
        return {
            "root": str(self.root),
            "generated_at": self.generated_at,
            "advisory_db_digest": self.advisory_db_digest,
            "unresolved": [str(n) for n in self.unresolved],
            "findings": [
                {
                    "advisory_id": f.advisory.advisory_id,
                    "category": f.advisory.category,
                    "severity": f.advisory.severity,
                    "summary": f.advisory.summary,
                    "matched_node": str(f.matched_node),
                    "paths": [[str(n) for n in p] for p in f.paths],
                    "truncated": f.truncated,
                }
                for f in self.findings
            ],
        }

    def serialize(self) -> bytes:
        return syntax.dump(self.to_tree())


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def audit_graph(g: ProvenanceGraph, db: AdvisoryDatabase, generated_at: Optional[str] = None) -> AuditReport:
    findings = []
    active = db.active()
    for node in g.sorted_nodes():
        for a in active:
            if matches_advisory(a, node):
                paths, truncated = all_paths(g, g.root, node, MAX_PATHS)
                findings.append(AuditFinding(a, node, tuple(tuple(p) for p in paths), truncated))
    findings.sort(key=AuditFinding.sort_key)
    unresolved = tuple(n for n in g.sorted_nodes() if not n.resolved)
    return AuditReport(g.root, tuple(findings), generated_at or _now(), db.digest, unresolved)


def audit(
    root: ModelRecord,
    resolver: Resolver,
    db: AdvisoryDatabase,
    generated_at: Optional[str] = None,
) -> AuditReport:
    """Check every node of ``root``'s provenance graph against active advisories.

    Missing dependencies do not abort the audit; they become unresolved nodes
    that still match advisories by id. Cycles raise :class:`CycleError`.
    """
    g = build_graph(root, resolver, allow_missing=True)
    return audit_graph(g, db, generated_at)


@dataclass(frozen=True)
class Notification:
    id: RecordId
    version: str
    contacts: tuple[str, ...]
    maintainers: tuple[str, ...]
    role: str  # "downstream" or "target"


def stakeholders(
    all_records: Iterable[ModelRecord],
    target_id: RecordId | str,
    affected: Optional[VersionReq] = None,
    target_kind: Optional[str] = None,
) -> list[Notification]:
    """Records depending on ``target_id`` (role ``downstream``) plus the matching targets themselves."""
    records = list(all_records)
    target = (target_id, affected, target_kind)
    impacted = downstream_impact(records, target)
    is_target = target_matcher(target)
    by_key = {NodeKey.of(r): r for r in records}
    out = []
    for key, r in sorted(by_key.items(), key=lambda kv: kv[0].sort_key()):
        if key in impacted:
            role = "downstream"
        elif is_target(key):
            role = "target"
        else:
            continue
        out.append(
            Notification(
                r.id,
                str(r.version),
                tuple(m.contact for m in r.maintainers if m.contact),
                tuple(m.name for m in r.maintainers),
                role,
            )
        )
    return out


def notify_set(all_records: Iterable[ModelRecord], advisory: Advisory) -> list[Notification]:
    """Stakeholders to warn about an advisory. Withdrawn advisories notify nobody."""
    if not advisory.active:
        return []
    return stakeholders(all_records, advisory.target_id, advisory.affected, advisory.target_kind)
