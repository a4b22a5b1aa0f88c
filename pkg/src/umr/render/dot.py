"""GraphViz DOT emitter for provenance graphs."""

from __future__ import annotations

from collections import deque
from typing import Optional

from umr.graph import NodeKey, ProvenanceGraph, topo_order

SHAPES = {"model": "box", "dataset": "ellipse"}


def q(text: str) -> str:
    """A DOT double-quoted ID."""
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\r", "").replace("\n", "\\n")
    return f'"{escaped}"'


def depths(graph: ProvenanceGraph) -> dict[NodeKey, int]:
    """Shortest edge distance from the root to every node."""
    out = {graph.root: 0}
    queue = deque([graph.root])
    while queue:
        n = queue.popleft()
        for m in graph.successors(n):
            if m not in out:
                out[m] = out[n] + 1
                queue.append(m)
    return out


def visible_nodes(graph: ProvenanceGraph, max_depth: Optional[int]) -> list[NodeKey]:
    order = topo_order(graph)
    if max_depth is None:
        return order
    d = depths(graph)
    return [n for n in order if d.get(n, 0) <= max_depth]


def node_label(graph: ProvenanceGraph, n: NodeKey) -> str:
    if n.resolved:
        return f"{n.id}\n{n.version}"
    reqs = ", ".join(graph.unresolved_reqs.get(n, ()))
    return f"{n.id}\n(unresolved {reqs})" if reqs else f"{n.id}\n(unresolved)"


def render(graph: ProvenanceGraph, flip_arrows: bool = True, max_depth: Optional[int] = None) -> bytes:
    if not graph.nodes:
        raise ValueError("cannot render an empty graph")
    nodes = visible_nodes(graph, max_depth)
    shown = set(nodes)
    pos = {n: i for i, n in enumerate(nodes)}
    lines = [f"digraph {q('provenance: ' + str(graph.root))} {{"]
    lines.append(f"  graph [rankdir={'BT' if flip_arrows else 'TB'}];")
    lines.append('  node [fontname="Helvetica"];')
    lines.append('  edge [fontname="Helvetica", fontsize=10];')
    for n in nodes:
        attrs = [f"shape={SHAPES.get(n.kind, 'box')}", f"label={q(node_label(graph, n))}"]
        if not n.resolved:
            attrs.append("style=dashed")
        lines.append(f"  {q(str(n))} [{', '.join(attrs)}];")
    edges = sorted(
        (e for e in graph.edges if e.src in shown and e.dst in shown),
        key=lambda e: (pos[e.src], pos[e.dst], e.relation),
    )
    for e in edges:
        attrs = [f"label={q(e.relation)}"]
        if flip_arrows:
            attrs.append("dir=back")
        if not e.dst.resolved:
            attrs.append("style=dashed")
        lines.append(f"  {q(str(e.src))} -> {q(str(e.dst))} [{', '.join(attrs)}];")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")
