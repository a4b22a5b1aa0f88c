"""Unified model records: versioned, digest-verified provenance manifests for models and datasets."""

from __future__ import annotations

from umr.advisory import Advisory, AdvisoryDatabase, AuditReport, audit, load_advisories, notify_set
from umr.errors import (
    CycleError,
    ImmutableVersionError,
    IntegrityError,
    ManifestSyntaxError,
    MissingDependencyError,
    RecordError,
    ResolutionError,
    TransportError,
    UMRError,
    Violation,
)
from umr.graph import NodeKey, ProvenanceGraph, build_graph, downstream_impact, topo_order, upstream_closure
from umr.record import (
    DependencyRef,
    ModelRecord,
    RecordId,
    canonicalize,
    derive_record,
    digest,
    parse_record,
    validate,
)
from umr.registry import HttpSource, LocalSource, RegistryView, init_local, merge_view, open_local
from umr.versioning import Version, VersionReq, matches, parse_req, parse_version

__all__ = [
    "Advisory",
    "AdvisoryDatabase",
    "AuditReport",
    "CycleError",
    "DependencyRef",
    "HttpSource",
    "ImmutableVersionError",
    "IntegrityError",
    "LocalSource",
    "ManifestSyntaxError",
    "MissingDependencyError",
    "ModelRecord",
    "NodeKey",
    "ProvenanceGraph",
    "RecordError",
    "RecordId",
    "RegistryView",
    "ResolutionError",
    "TransportError",
    "UMRError",
    "Version",
    "VersionReq",
    "Violation",
    "audit",
    "build_graph",
    "canonicalize",
    "derive_record",
    "digest",
    "downstream_impact",
    "init_local",
    "load_advisories",
    "matches",
    "merge_view",
    "notify_set",
    "open_local",
    "parse_record",
    "parse_req",
    "parse_version",
    "topo_order",
    "upstream_closure",
    "validate",
]
