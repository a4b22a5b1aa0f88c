"""Record builders shared by the test modules."""

from __future__ import annotations

from umr.record import DependencyRef, ModelRecord, RecordId
from umr.versioning import parse_req, parse_version


def make_record(rid: str, version: str = "1.0.0", kind: str = "model", deps=(), **kw) -> ModelRecord:
    """Compact record builder; ``deps`` items are (target, kind, req, relation)."""
    refs = [DependencyRef(RecordId.parse(t), k, parse_req(q), rel) for t, k, q, rel in deps]
    return ModelRecord(
        id=RecordId.parse(rid),
        version=parse_version(version),
        kind=kind,
        license=kw.pop("license", "MIT"),
        dependencies=tuple(refs),
        **kw,
    )


def dag_records(dag) -> list[ModelRecord]:
    """Records realizing an oracle ``RandomDag``; every edge is an exact requirement."""
    out = []
    for name in dag.names:
        deps = []
        for m in dag.edges[name]:
            rel = "training_data" if dag.kinds[m] == "dataset" else "component"
            deps.append((m, dag.kinds[m], "=1.0.0", rel))
        out.append(make_record(name, "1.0.0", dag.kinds[name], deps))
    return out


def cycle_records(length: int, prefix: str = "c") -> list[ModelRecord]:
    """``length`` models where each depends on the next, closing a cycle."""
    names = [f"{prefix}{i}" for i in range(length)]
    return [
        make_record(n, "1.0.0", "model", [(names[(i + 1) % length], "model", "^1.0.0", "component")])
        for i, n in enumerate(names)
    ]


class LiveServer:
    """Run the service with uvicorn on a free local port in a background thread."""

    def __init__(self, app):
        import socket

        import uvicorn

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            self.port = s.getsockname()[1]
        self.url = f"http://127.0.0.1:{self.port}"
        self.server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning"))
        self.thread = None

    def __enter__(self) -> "LiveServer":
        import threading
        import time

        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.thread.start()
        deadline = time.monotonic() + 5
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=5)
