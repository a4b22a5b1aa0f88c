"""Record documents in markdown, HTML and LaTeX.

All three writers consume the same section model so that section order and
content stay identical across formats.
"""

from __future__ import annotations

import html as _html
from dataclasses import dataclass
from typing import Optional

from umr import syntax
from umr.graph import ProvenanceGraph
from umr.record import ARTIFACT_KEYS, ModelRecord
from umr.render.dot import depths, visible_nodes


@dataclass(frozen=True)
class Table:
    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    key: str


@dataclass(frozen=True)
class Text:
    body: str


@dataclass(frozen=True)
class Items:
    items: tuple[str, ...]


@dataclass(frozen=True)
class Empty:
    message: str


@dataclass(frozen=True)
class Code:
    body: str


@dataclass(frozen=True)
class Section:
    key: str
    title: str
    content: object


def _fmt_value(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def sections(record: ModelRecord, graph: Optional[ProvenanceGraph], max_depth: Optional[int]) -> list[Section]:
    maint = ", ".join(f"{m.name} <{m.contact}>" if m.contact else m.name for m in record.maintainers)
    identity = Table(
        ("Field", "Value"),
        (
            ("Identifier", str(record.id)),
            ("Version", str(record.version)),
            ("Kind", record.kind),
            ("Title", record.title),
            ("Publisher", record.publisher),
            ("Maintainers", maint),
            ("License", record.license),
            ("Record format", str(record.record_format_version)),
        ),
        "identity",
    )
    out = [Section("identity", "Identity", identity)]

    order = [k for k in ARTIFACT_KEYS if k in record.artifacts] + sorted(
        k for k in record.artifacts if k not in ARTIFACT_KEYS
    )
    if order:
        rows = tuple((k, record.artifacts[k].availability, record.artifacts[k].url or "") for k in order)
        out.append(Section("artifacts", "Artifacts", Table(("Artifact", "Availability", "URL"), rows, "artifacts")))
    else:
        out.append(Section("artifacts", "Artifacts", Empty("No artifact availability declared.")))

    if record.dependencies:
        rows = tuple(
            (str(d.target), d.kind, d.req.text, d.relation, d.note or "") for d in record.dependencies
        )
        out.append(
            Section(
                "dependencies",
                "Dependencies",
                Table(("Target", "Kind", "Requirement", "Relation", "Note"), rows, "dependencies"),
            )
        )
    else:
        out.append(Section("dependencies", "Dependencies", Empty("No dependencies declared.")))

    if record.evaluations:
        rows = tuple(
            (
                e.metric,
                _fmt_value(e.value),
                "yes" if e.higher_is_better else "no",
                str(e.dataset) if e.dataset else "",
                e.qualitative or "",
                e.protocol or "",
            )
            for e in record.evaluations
        )
        out.append(
            Section(
                "evaluations",
                "Evaluations",
                Table(("Metric", "Value", "Higher is better", "Dataset", "Qualitative", "Protocol"), rows, "evaluations"),
            )
        )
    else:
        out.append(Section("evaluations", "Evaluations", Empty("No evaluation results reported.")))

    out.append(Section("intended-use", "Intended use", Text(record.intended_use) if record.intended_use else Empty("Not stated.")))
    out.append(Section("ethical-notes", "Ethical notes", Text(record.ethical_notes) if record.ethical_notes else Empty("Not stated.")))
    out.append(Section("references", "References", Items(tuple(record.references)) if record.references else Empty("None.")))

    if record.extra:
        out.append(Section("additional-fields", "Additional fields", Code(syntax.dump(dict(record.extra)).decode("utf-8"))))

    if graph is not None:
        d = depths(graph)
        items = []
        for n in visible_nodes(graph, max_depth):
            if n == graph.root:
                continue
            via = sorted({e.relation for e in graph.in_edges(n)})
            items.append(f"{n} ({n.kind}, depth {d.get(n, 0)}, via {', '.join(via)})")
        out.append(
            Section("provenance", "Provenance", Items(tuple(items)) if items else Empty("No upstream dependencies."))
        )
    return out


# -- markdown ------------------------------------------------------------------


def _md_cell(s: str) -> str:
    return s.replace("\\", "\\\\").replace("|", "\\|").replace("\r", "").replace("\n", "<br>")


def markdown(record: ModelRecord, graph: Optional[ProvenanceGraph], max_depth: Optional[int]) -> bytes:
    lines = [f"# {_md_cell(record.title or str(record.id))}", "", f"`{record.ref}`", ""]
    for s in sections(record, graph, max_depth):
        lines += [f"## {s.title}", ""]
        c = s.content
        if isinstance(c, Table):
            lines.append("| " + " | ".join(c.headers) + " |")
            lines.append("|" + "|".join(" --- " for _ in c.headers) + "|")
            for row in c.rows:
                lines.append("| " + " | ".join(_md_cell(x) for x in row) + " |")
        elif isinstance(c, Text):
            lines.append(c.body.replace("\r", ""))
        elif isinstance(c, Items):
            lines += [f"- {_md_cell(i)}" for i in c.items]
        elif isinstance(c, Code):
            fence = "````" if "```" in c.body else "```"
            lines += [fence + "yaml", c.body.rstrip("\n"), fence]
        elif isinstance(c, Empty):
            lines.append(c.message)
        lines.append("")
    return ("\n".join(lines).rstrip("\n") + "\n").encode("utf-8")


# -- html ----------------------------------------------------------------------


def _h(s: str) -> str:
    return _html.escape(s, quote=True)


def html(record: ModelRecord, graph: Optional[ProvenanceGraph], max_depth: Optional[int]) -> bytes:
    title = _h(record.title or str(record.id))
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8"/>',
        f"<title>{title} ({_h(record.ref)})</title>",
        "</head>",
        "<body>",
        f"<h1>{title}</h1>",
        f"<p><code>{_h(record.ref)}</code></p>",
    ]
    for s in sections(record, graph, max_depth):
        out.append(f'<section id="{s.key}">')
        out.append(f"<h2>{_h(s.title)}</h2>")
        c = s.content
        if isinstance(c, Table):
            out.append(f'<table class="{c.key}">')
            out.append("<thead><tr>" + "".join(f"<th>{_h(x)}</th>" for x in c.headers) + "</tr></thead>")
            out.append("<tbody>")
            for row in c.rows:
                out.append("<tr>" + "".join(f"<td>{_h(x)}</td>" for x in row) + "</tr>")
            out.append("</tbody>")
            out.append("</table>")
        elif isinstance(c, Text):
            out.append(f"<p>{_h(c.body)}</p>")
        elif isinstance(c, Items):
            out.append("<ul>")
            out += [f"<li>{_h(i)}</li>" for i in c.items]
            out.append("</ul>")
        elif isinstance(c, Code):
            out.append(f"<pre>{_h(c.body)}</pre>")
        elif isinstance(c, Empty):
            out.append(f'<p class="empty">{_h(c.message)}</p>')
        out.append("</section>")
    out += ["</body>", "</html>"]
    return ("\n".join(out) + "\n").encode("utf-8")


# -- latex ---------------------------------------------------------------------

_TEX = {
    "\\": r"\textbackslash{}",
    "&": r"\&",
    "%": r"\%",
    "$": r"\$",
    "#": r"\#",
    "_": r"\_",
    "{": r"\{",
    "}": r"\}",
    "~": r"\textasciitilde{}",
    "^": r"\textasciicircum{}",
    "<": r"\textless{}",
    ">": r"\textgreater{}",
    "|": r"\textbar{}",
    "\n": " ",
    "\r": "",
}


def tex(s: str) -> str:
    return "".join(_TEX.get(ch, ch) for ch in s)


def _tex_table(t: Table) -> list[str]:
    width = {2: (3.2, 10.8), 3: (3.0, 3.0, 8.0)}.get(len(t.headers))
    if width is None:
        each = round(14.0 / len(t.headers), 2)
        width = tuple(each for _ in t.headers)
    spec = "".join(f"p{{{w}cm}}" for w in width)
    lines = [r"\begin{tabular}{" + spec + "}", r"\hline"]
    lines.append(" & ".join(r"\textbf{" + tex(h) + "}" for h in t.headers) + r" \\")
    lines.append(r"\hline")
    for row in t.rows:
        lines.append(" & ".join(tex(x) for x in row) + r" \\")
    lines += [r"\hline", r"\end{tabular}"]
    return lines


def latex(record: ModelRecord, graph: Optional[ProvenanceGraph], max_depth: Optional[int]) -> bytes:
    lines = [
        r"\documentclass{article}",
        r"\usepackage[T1]{fontenc}",
        r"\usepackage[utf8]{inputenc}",
        r"\usepackage[margin=2cm]{geometry}",
        r"\title{" + tex(record.title or str(record.id)) + "}",
        r"\date{}",
        r"\begin{document}",
        r"\maketitle",
        r"\noindent\texttt{" + tex(record.ref) + "}",
        "",
    ]
    for s in sections(record, graph, max_depth):
        lines.append(r"\section*{" + tex(s.title) + "}")
        c = s.content
        if isinstance(c, Table):
            lines.append(r"\noindent")
            lines += _tex_table(c)
        elif isinstance(c, Text):
            lines.append(tex(c.body))
        elif isinstance(c, Items):
            lines.append(r"\begin{itemize}")
            lines += [r"\item " + tex(i) for i in c.items]
            lines.append(r"\end{itemize}")
        elif isinstance(c, Code):
            # escaped monospace lines rather than verbatim, so no input can close an environment
            lines.append(r"\begin{flushleft}\ttfamily")
            lines += [tex(ln).replace(" ", "~") + r"\\" for ln in c.body.rstrip("\n").split("\n")]
            lines.append(r"\end{flushleft}")
        elif isinstance(c, Empty):
            lines.append(r"\emph{" + tex(c.message) + "}")
        lines.append("")
    lines.append(r"\end{document}")
    return ("\n".join(lines) + "\n").encode("utf-8")
