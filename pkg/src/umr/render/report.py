"""Audit reports as markdown, HTML and LaTeX."""

from __future__ import annotations

import html as _html
from itertools import groupby

from umr.advisory import AuditFinding, AuditReport
from umr.render.documents import tex

CLEAN = "No advisories affect this record."
ARROW = " → "


def chain(path) -> str:
    return ARROW.join(str(n.id) for n in path)


def _groups(report: AuditReport):
    # findings are already ordered by severity desc, then advisory id
    return [(sev, list(fs)) for sev, fs in groupby(report.findings, key=lambda f: f.advisory.severity)]


def _headline(f: AuditFinding) -> str:
    a = f.advisory
    return f"{a.advisory_id} ({a.category}) affects {f.matched_node}"


def markdown(report: AuditReport) -> bytes:
    lines = [
        f"# Audit report for {report.root}",
        "",
        f"Generated at {report.generated_at}; advisory database digest `{report.advisory_db_digest}`.",
        "",
    ]
    if report.clean:
        lines.append(CLEAN)
    for sev, findings in _groups(report):
        lines += [f"## {sev.capitalize()}", ""]
        for f in findings:
            lines += [f"### {_headline(f)}", "", f.advisory.summary, ""]
            lines += [f"- {chain(p)}" for p in f.paths]
            if f.truncated:
                lines.append(f"- (further paths omitted after {len(f.paths)})")
            lines.append("")
    if report.unresolved:
        lines += ["", "Unresolved dependencies: " + ", ".join(str(n.id) for n in report.unresolved)]
    return ("\n".join(lines).rstrip("\n") + "\n").encode("utf-8")


def html(report: AuditReport) -> bytes:
    h = lambda s: _html.escape(str(s), quote=True)  # noqa: E731
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8"/>',
        f"<title>Audit report for {h(report.root)}</title>",
        "</head>",
        "<body>",
        f"<h1>Audit report for {h(report.root)}</h1>",
        f"<p>Generated at {h(report.generated_at)}; advisory database digest "
        f"<code>{h(report.advisory_db_digest)}</code>.</p>",
    ]
    if report.clean:
        out.append(f"<p>{h(CLEAN)}</p>")
    for sev, findings in _groups(report):
        out.append(f'<section class="severity-{sev}">')
        out.append(f"<h2>{h(sev.capitalize())}</h2>")
        for f in findings:
            out.append(f"<h3>{h(_headline(f))}</h3>")
            out.append(f"<p>{h(f.advisory.summary)}</p>")
            out.append("<ul>")
            out += [f"<li>{h(chain(p))}</li>" for p in f.paths]
            if f.truncated:
                out.append(f"<li>(further paths omitted after {len(f.paths)})</li>")
            out.append("</ul>")
        out.append("</section>")
    if report.unresolved:
        out.append("<p>Unresolved dependencies: " + h(", ".join(str(n.id) for n in report.unresolved)) + "</p>")
    out += ["</body>", "</html>"]
    return ("\n".join(out) + "\n").encode("utf-8")


def latex(report: AuditReport) -> bytes:
    lines = [
        r"\documentclass{article}",
        r"\usepackage[T1]{fontenc}",
        r"\usepackage[utf8]{inputenc}",
        r"\begin{document}",
        r"\section*{Audit report for " + tex(str(report.root)) + "}",
        "Generated at " + tex(report.generated_at) + r"; advisory database digest \texttt{"
        + tex(report.advisory_db_digest) + "}.",
        "",
    ]
    if report.clean:
        lines.append(tex(CLEAN))
    for sev, findings in _groups(report):
        lines.append(r"\subsection*{" + tex(sev.capitalize()) + "}")
        for f in findings:
            lines.append(r"\paragraph{" + tex(_headline(f)) + "}")
            lines.append(tex(f.advisory.summary))
            lines.append(r"\begin{itemize}")
            for p in f.paths:
                lines.append(r"\item " + r" $\rightarrow$ ".join(tex(str(n.id)) for n in p))
            if f.truncated:
                lines.append(r"\item (further paths omitted after " + str(len(f.paths)) + ")")
            lines.append(r"\end{itemize}")
    if report.unresolved:
        lines.append("")
        lines.append("Unresolved dependencies: " + tex(", ".join(str(n.id) for n in report.unresolved)))
    lines.append(r"\end{document}")
    return ("\n".join(lines) + "\n").encode("utf-8")

