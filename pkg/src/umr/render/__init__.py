"""Publishing records, provenance graphs and audit reports.

Formats: markdown, html, latex and GraphViz dot. PDF is obtained by
compiling the LaTeX output with any standard TeX toolchain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from umr.advisory import AuditReport
from umr.errors import RecordError
from umr.graph import NodeKey, ProvenanceGraph
from umr.record import ModelRecord, errors_of, validate
from umr.render import documents, dot, report

FORMATS = ("markdown", "html", "latex", "dot")
REPORT_FORMATS = ("markdown", "html", "latex", "umr")


@dataclass(frozen=True)
class RenderTarget:
    format: str
    include_graph: bool = False
    max_depth: Optional[int] = None
    # Display arrows upstream -> downstream; edge statements keep dependency direction.
    flip_arrows: bool = True

    def __post_init__(self):
        if self.format not in FORMATS + REPORT_FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


def render_record(record: ModelRecord, graph: Optional[ProvenanceGraph], target: RenderTarget) -> bytes:
    violations = validate(record)
    if errors_of(violations):
        raise RecordError(violations)
    if target.format == "dot":
        if graph is None:
            raise ValueError("dot output needs a provenance graph")
        return render_dot(graph, target)
    if target.include_graph:
        if graph is None:
            raise ValueError("include_graph needs a provenance graph")
        if graph.root != NodeKey.of(record):
            raise ValueError(f"graph is rooted at {graph.root}, not {record.ref}")
    if target.format == "markdown":
        return documents.markdown(record, graph if target.include_graph else None, target.max_depth)
    if target.format == "html":
        return documents.html(record, graph if target.include_graph else None, target.max_depth)
    if target.format == "latex":
        return documents.latex(record, graph if target.include_graph else None, target.max_depth)
    raise ValueError(f"records cannot be rendered as {target.format!r}")


def render_dot(graph: ProvenanceGraph, target: Optional[RenderTarget] = None) -> bytes:
    target = target or RenderTarget("dot")
    return dot.render(graph, flip_arrows=target.flip_arrows, max_depth=target.max_depth)


def render_report(audit: AuditReport, target: RenderTarget) -> bytes:
    if target.format == "markdown":
        return report.markdown(audit)
    if target.format == "html":
        return report.html(audit)
    if target.format == "latex":
        return report.latex(audit)
    if target.format == "umr":
        return audit.serialize()
    raise ValueError(f"audit reports cannot be rendered as {target.format!r}")


__all__ = ["RenderTarget", "render_record", "render_dot", "render_report", "FORMATS", "REPORT_FORMATS"]
