"""Provenance graphs over records.

Edges point from a record to the upstream inputs it depends on.
"""

from __future__ import annotations

import heapq
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Optional, Union

from umr.errors import CycleError, MissingDependencyError, ResolutionError
from umr.record import ModelRecord, RecordId, as_record_id
from umr.versioning import Version, VersionReq, best_match, matches, parse_req

Resolver = Callable[[RecordId, VersionReq], Optional[ModelRecord]]


@dataclass(frozen=True)
class NodeKey:
    """A versioned node. ``version`` is ``None`` for unresolved dependencies."""

    id: RecordId
    version: Optional[Version]
    kind: str

    @classmethod
    def of(cls, record: ModelRecord) -> "NodeKey":
        return cls(record.id, record.version, record.kind)

    @property
    def resolved(self) -> bool:
        return self.version is not None

    def sort_key(self) -> tuple:
        v = self.version.sort_key() if self.version is not None else ()
        return (str(self.id), self.version is None, v, self.kind)

    def __str__(self) -> str:
        return f"{self.id}@{self.version if self.version is not None else 'unresolved'}"


@dataclass(frozen=True)
class Edge:
    src: NodeKey
    dst: NodeKey
    relation: str


@dataclass(frozen=True)
class ProvenanceGraph:
    root: NodeKey
    nodes: Mapping[NodeKey, Optional[ModelRecord]]
    edges: frozenset
    # Requirement strings that failed to resolve, per unresolved node.
    unresolved_reqs: Mapping[NodeKey, tuple] = field(default_factory=dict)

    def __post_init__(self):
        succ = defaultdict(list)
        pred = defaultdict(list)
        for e in sorted(self.edges, key=lambda e: (e.src.sort_key(), e.dst.sort_key(), e.relation)):
            succ[e.src].append(e)
            pred[e.dst].append(e)
        object.__setattr__(self, "_succ", dict(succ))
        object.__setattr__(self, "_pred", dict(pred))

    def __contains__(self, n: NodeKey) -> bool:
        return n in self.nodes

    def record(self, n: NodeKey) -> Optional[ModelRecord]:
        return self.nodes[n]

    def out_edges(self, n: NodeKey) -> list[Edge]:
        return self._succ.get(n, [])

    def in_edges(self, n: NodeKey) -> list[Edge]:
        return self._pred.get(n, [])

    def successors(self, n: NodeKey) -> list[NodeKey]:
        seen = []
        for e in self.out_edges(n):
            if e.dst not in seen:
                seen.append(e.dst)
        return seen

    def sorted_nodes(self) -> list[NodeKey]:
        return sorted(self.nodes, key=NodeKey.sort_key)


def resolver_from_records(records: Iterable[ModelRecord]) -> Resolver:
    """Resolve by highest matching version among an in-memory record set."""
    by_id: dict = defaultdict(dict)
    for r in records:
        by_id[(r.id, r.kind)][r.version] = r

    def resolve(rid: RecordId, req: VersionReq, kind: Optional[str] = None) -> Optional[ModelRecord]:
        pools = [by_id.get((rid, kind), {})] if kind else [by_id.get((rid, k), {}) for k in ("model", "dataset")]
        candidates = {v: r for pool in pools for v, r in pool.items()}
        v = best_match(req, candidates)
        return candidates[v] if v is not None else None

    return resolve


def build_graph(
    root: Union[ModelRecord, NodeKey],
    resolver: Resolver,
    allow_missing: bool = False,
) -> ProvenanceGraph:
    """Resolve the transitive upstream closure of ``root``.

    Each dependency resolves through ``resolver`` (expected to apply
    highest-version matching). Raises :class:`CycleError` with the full cycle
    path, or :class:`MissingDependencyError` unless ``allow_missing``.
    """
    if isinstance(root, NodeKey):
        record = resolver(root.id, parse_req(f"={root.version}"))
        if record is None or NodeKey.of(record) != root:
            raise MissingDependencyError(root.id, f"={root.version}")
        root = record

    nodes: dict = {}
    edges: set = set()
    unresolved: dict = defaultdict(list)
    on_stack: list[NodeKey] = []
    done: set = set()

    def visit(record: ModelRecord) -> None:
        key = NodeKey.of(record)
        nodes[key] = record
        on_stack.append(key)
        for dep in record.dependencies:
            child = resolver(dep.target, dep.req)
            if child is not None and child.kind != dep.kind:
                raise ResolutionError(
                    f"{record.ref} expects {dep.target} to be a {dep.kind}, registry has a {child.kind}"
                )
            if child is None:
                if not allow_missing:
                    raise MissingDependencyError(dep.target, dep.req, record.ref)
                ckey = NodeKey(dep.target, None, dep.kind)
                nodes.setdefault(ckey, None)
                if dep.req.text not in unresolved[ckey]:
                    unresolved[ckey].append(dep.req.text)
                edges.add(Edge(key, ckey, dep.relation))
                continue
            ckey = NodeKey.of(child)
            edges.add(Edge(key, ckey, dep.relation))
            if ckey in on_stack:
                start = on_stack.index(ckey)
                raise CycleError(on_stack[start:] + [ckey])
            if ckey not in done:
                visit(child)
        on_stack.pop()
        done.add(key)

    visit(root)
    return ProvenanceGraph(
        NodeKey.of(root),
        nodes,
        frozenset(edges),
        {k: tuple(sorted(v)) for k, v in unresolved.items()},
    )


def upstream_closure(g: ProvenanceGraph, n: NodeKey) -> set[NodeKey]:
    """Every node reachable from ``n``, excluding ``n`` itself."""
    if n not in g.nodes:
        raise KeyError(f"{n} is not in the graph")
    seen: set = set()
    queue = deque(g.successors(n))
    while queue:
        m = queue.popleft()
        if m in seen:
            continue
        seen.add(m)
        queue.extend(g.successors(m))
    seen.discard(n)
    return seen


Target = Union[NodeKey, RecordId, str, tuple]


def target_matcher(target: Target) -> Callable[[NodeKey], bool]:
    """Predicate for an exact node, or an ``(id, range)``/``(id, range, kind)`` target.

    A bare id matches every version, prereleases included. Unresolved nodes
    match on id (and kind) alone.
    """
    if isinstance(target, NodeKey):
        return lambda n: n == target
    kind = None
    req = None
    if isinstance(target, tuple):
        rid = as_record_id(target[0])
        if len(target) > 1 and target[1] is not None:
            req = target[1] if isinstance(target[1], VersionReq) else parse_req(target[1])
        if len(target) > 2:
            kind = target[2]
    else:
        rid = as_record_id(target)

    def match(n: NodeKey) -> bool:
        if n.id != rid or (kind is not None and n.kind != kind):
            return False
        if n.version is None or req is None:
            return True
        return matches(req, n.version)

    return match


def _universe(records: Iterable[ModelRecord]) -> tuple[dict, dict]:
    """Reverse adjacency over a record set, resolving every edge within it."""
    records = list(records)
    resolve = resolver_from_records(records)
    keys: dict = {}
    reverse: dict = defaultdict(set)
    for r in records:
        key = NodeKey.of(r)
        keys[key] = r
        for dep in r.dependencies:
            child = resolve(dep.target, dep.req)
            ckey = NodeKey.of(child) if child is not None else NodeKey(dep.target, None, dep.kind)
            reverse[ckey].add(key)
    return keys, reverse


def downstream_impact(all_records: Iterable[ModelRecord], target: Target) -> set[NodeKey]:
    """Records whose upstream closure contains a node matching ``target``."""
    keys, reverse = _universe(all_records)
    match = target_matcher(target)
    starts = [n for n in set(keys) | set(reverse) if match(n)]
    impacted: set = set()
    queue = deque(p for s in starts for p in reverse.get(s, ()))
    while queue:
        n = queue.popleft()
        if n in impacted:
            continue
        impacted.add(n)
        queue.extend(reverse.get(n, ()))
    return impacted


def topo_order(g: ProvenanceGraph) -> list[NodeKey]:
    """Dependents before dependencies; ties broken by (id, version)."""
    indegree = {n: 0 for n in g.nodes}
    for e in g.edges:
        indegree[e.dst] += 1
    heap = [(n.sort_key(), n) for n, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, n = heapq.heappop(heap)
        order.append(n)
        for e in g.out_edges(n):
            indegree[e.dst] -= 1
            if indegree[e.dst] == 0:
                heapq.heappush(heap, (e.dst.sort_key(), e.dst))
    if len(order) != len(g.nodes):
        raise CycleError(detect_cycles((e.src, e.dst) for e in g.edges) or [])
    return order


def _node_sort_key(n: Hashable):
    key = getattr(n, "sort_key", None)
    return (0, key()) if callable(key) else (1, str(n))


def detect_cycles(edges: Iterable) -> Optional[list]:
    """One witness cycle ``[a, ..., a]`` if the edge set has a cycle, else ``None``.

    Edges are ``(src, dst)`` pairs or objects with ``src``/``dst`` attributes.
    """
    adj: dict = defaultdict(list)
    for e in edges:
        if hasattr(e, "src"):
            a, b = e.src, e.dst
        else:
            a, b = e[0], e[1]
        adj[a].append(b)
        adj.setdefault(b, [])
    for a in adj:
        adj[a] = sorted(set(adj[a]), key=_node_sort_key)

    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in adj}
    for start in sorted(adj, key=_node_sort_key):
        if color[start] != WHITE:
            continue
        path = [start]
        color[start] = GREY
        stack = [iter(adj[start])]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                color[path.pop()] = BLACK
                continue
            if color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append(iter(adj[nxt]))
    return None


def all_paths(g: ProvenanceGraph, src: NodeKey, dst: NodeKey, limit: int = 64) -> tuple[list, bool]:
    """Simple paths from ``src`` to ``dst`` (at most ``limit``) and whether more exist."""
    paths: list = []
    truncated = False
    path = [src]
    # Only descend into nodes that can still reach dst.
    useful = {dst}
    queue = deque([dst])
    while queue:
        n = queue.popleft()
        for e in g.in_edges(n):
            if e.src not in useful:
                useful.add(e.src)
                queue.append(e.src)

    def walk(n: NodeKey) -> None:
        nonlocal truncated
        if truncated:
            return
        if n == dst:
            if len(paths) >= limit:
                truncated = True
                return
            paths.append(list(path))
            return
        for m in g.successors(n):
            if m in path or m not in useful:
                continue
            path.append(m)
            walk(m)
            path.pop()

    walk(src)
    return paths, truncated
