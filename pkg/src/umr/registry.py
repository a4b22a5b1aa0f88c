"""Registry sources, the digest-verified index, and merged registry views.

A local source is a directory::

    index.umr.yaml
    advisories.umr.yaml          (optional)
    records/<name>-<version>.umr.yaml
    records/<namespace>/<name>-<version>.umr.yaml

HTTP sources talk to the service's ``/v1`` endpoints and are read-only
except for ``publish``, which goes through ``POST /v1/records``.
"""

from __future__ import annotations

import datetime as dt
import os
import tempfile
import threading
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Union

import httpx

from umr import syntax
from umr.advisory import AdvisoryDatabase, load_advisories
from umr.errors import (
    ImmutableVersionError,
    IntegrityError,
    ManifestSyntaxError,
    NotFoundError,
    RecordError,
    RegistryError,
    ShadowWarning,
    TransportError,
    Violation,
    YankedWarning,
)
from umr.record import ModelRecord, RecordId, as_record_id, canonicalize, digest_bytes, errors_of, parse_record, validate
from umr.versioning import Version, VersionReq, best_match, parse_version

INDEX_FILE = "index.umr.yaml"
ADVISORY_FILE = "advisories.umr.yaml"
CONFIG_FILE = "umr-config.yaml"
INDEX_FORMAT_VERSION = 1
MANIFEST_MEDIA_TYPE = "application/x-umr+yaml"
TRUST_LEVELS = ("public", "private")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class IndexEntry:
    digest: str
    kind: str
    path: str
    yanked: bool = False


@dataclass
class RegistryIndex:
    entries: dict = field(default_factory=dict)  # str(id) -> str(version) -> IndexEntry
    advisories_digest: str = ""
    generated_at: str = ""
    index_format_version: int = INDEX_FORMAT_VERSION

    def get(self, rid: Union[RecordId, str], version: Union[Version, str]) -> Optional[IndexEntry]:
        return self.entries.get(str(rid), {}).get(str(version))

    def versions(self, rid: Union[RecordId, str]) -> dict:
        return self.entries.get(str(rid), {})

    def __contains__(self, rid) -> bool:
        return str(rid) in self.entries

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def to_tree(self) -> dict:
        return {
            "index_format_version": self.index_format_version,
            "advisories_digest": self.advisories_digest,
            "generated_at": self.generated_at,
            "entries": {
                rid: {
                    ver: {"digest": e.digest, "kind": e.kind, "path": e.path, "yanked": e.yanked}
                    for ver, e in versions.items()
                }
                for rid, versions in self.entries.items()
            },
        }

    def serialize(self) -> bytes:
        return syntax.dump(self.to_tree())

    @property
    def digest(self) -> str:
        return digest_bytes(self.serialize())

    @classmethod
    def parse(cls, data: bytes) -> "RegistryIndex":
        tree = syntax.load(data)
        if not isinstance(tree, dict):
            raise RegistryError("index must be a mapping")
        fmt = tree.get("index_format_version")
        if fmt != INDEX_FORMAT_VERSION:
            raise RegistryError(f"unsupported index format version {fmt!r}")
        raw = tree.get("entries") or {}
        if not isinstance(raw, dict):
            raise RegistryError("index entries must be a mapping")
        entries: dict = {}
        for rid, versions in raw.items():
            try:
                as_record_id(rid)
            except ValueError as exc:
                raise RegistryError(f"index entry {rid!r}: {exc}") from exc
            if not isinstance(versions, dict):
                raise RegistryError(f"index entry {rid!r} must map versions to entries")
            entries[rid] = {}
            for ver, e in versions.items():
                try:
                    parse_version(ver)
                except ValueError as exc:
                    raise RegistryError(f"index entry {rid}@{ver}: {exc}") from exc
                if not isinstance(e, dict):
                    raise RegistryError(f"index entry {rid}@{ver} must be a mapping")
                d = e.get("digest")
                if not isinstance(d, str) or len(d) != 64 or any(ch not in "0123456789abcdef" for ch in d):
                    raise RegistryError(f"index entry {rid}@{ver} has a malformed digest")
                if not isinstance(e.get("path"), str) or e.get("kind") not in ("model", "dataset"):
                    raise RegistryError(f"index entry {rid}@{ver} is missing path or kind")
                entries[rid][ver] = IndexEntry(d, e["kind"], e["path"], bool(e.get("yanked", False)))
        return cls(
            entries,
            str(tree.get("advisories_digest") or ""),
            str(tree.get("generated_at") or ""),
            fmt,
        )


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class Source:
    """Common read interface of local and HTTP sources."""

    name: str
    trust: str
    location: str

    def index(self) -> RegistryIndex:
        raise NotImplementedError

    def fetch_raw(self, rid: RecordId, version: Version) -> tuple[bytes, IndexEntry]:
        raise NotImplementedError

    def advisories(self) -> AdvisoryDatabase:
        raise NotImplementedError

    def has(self, rid: Union[RecordId, str]) -> bool:
        return rid in self.index()

    def versions(self, rid: Union[RecordId, str]) -> dict:
        """Parsed Version -> IndexEntry for one id."""
        return {parse_version(v): e for v, e in self.index().versions(rid).items()}

    def fetch_record(self, rid: Union[RecordId, str], version: Union[Version, str]) -> ModelRecord:
        """Fetch, verify the digest, then parse. Yanked versions warn but succeed."""
        rid = as_record_id(rid)
        version = version if isinstance(version, Version) else parse_version(version)
        data, entry = self.fetch_raw(rid, version)
        try:
            record = parse_record(data)
        except (RecordError, ManifestSyntaxError) as exc:
            raise RegistryError(f"{self.name}: stored record {rid}@{version} is invalid: {exc}") from exc
        if record.id != rid or record.version != version:
            raise RegistryError(f"{self.name}: index entry {rid}@{version} holds {record.ref}")
        if entry.yanked:
            warnings.warn(YankedWarning(f"{rid}@{version} is yanked in {self.name}"), stacklevel=2)
        return record

    def publish(self, record: ModelRecord):
        raise RegistryError(f"source {self.name} is read-only")

    def yank(self, rid, version):
        raise RegistryError(f"source {self.name} does not support yank")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, {self.location!r}, trust={self.trust!r})"


class LocalSource(Source):
    def __init__(self, path: Union[str, Path], name: Optional[str] = None, trust: str = "private"):
        self.path = Path(path)
        self.location = str(self.path)
        self.name = name or self.path.name or "local"
        self.trust = trust
        self._lock = threading.Lock()
        self._index = self._read_index()

    @property
    def index_path(self) -> Path:
        return self.path / INDEX_FILE

    def _read_index(self) -> RegistryIndex:
        try:
            data = self.index_path.read_bytes()
        except FileNotFoundError:
            raise RegistryError(f"missing registry index: {self.index_path}") from None
        try:
            return RegistryIndex.parse(data)
        except (ManifestSyntaxError, RegistryError) as exc:
            raise RegistryError(f"corrupt registry index {self.index_path}: {exc}") from exc

    def refresh(self) -> None:
        self._index = self._read_index()

    def index(self) -> RegistryIndex:
        return self._index

    def index_bytes(self) -> bytes:
        return self._index.serialize()

    def record_path(self, rid: RecordId, version: Version) -> str:
        stem = f"{rid.name}-{version}.umr.yaml"
        return f"records/{rid.namespace}/{stem}" if rid.namespace else f"records/{stem}"

    def fetch_raw(self, rid: RecordId, version: Version) -> tuple[bytes, IndexEntry]:
        entry = self._index.get(rid, version)
        if entry is None:
            raise NotFoundError(f"{rid}@{version} not found in {self.name}")
        try:
            data = (self.path / entry.path).read_bytes()
        except FileNotFoundError:
            raise RegistryError(f"{self.name}: record file missing for {rid}@{version}: {entry.path}") from None
        actual = digest_bytes(data)
        if actual != entry.digest:
            raise IntegrityError(f"{rid}@{version} in {self.name}", entry.digest, actual)
        return data, entry

    def advisories(self) -> AdvisoryDatabase:
        p = self.path / ADVISORY_FILE
        if not p.exists():
            return AdvisoryDatabase()
        return load_advisories(p.read_bytes())

    def _write_index(self, index: RegistryIndex) -> None:
        index.generated_at = _now()
        index.advisories_digest = self.advisories().digest
        _atomic_write(self.index_path, index.serialize())

    def publish(self, record: ModelRecord) -> RegistryIndex:
        violations = validate(record)
        if errors_of(violations):
            raise RecordError(violations)
        data = canonicalize(record)
        with self._lock:
            current = self._read_index()
            if current.get(record.id, record.version) is not None:
                raise ImmutableVersionError(record.id, record.version)
            rel = self.record_path(record.id, record.version)
            target = self.path / rel
            if target.exists() and target.read_bytes() != data:
                raise RegistryError(f"{self.name}: refusing to overwrite unindexed file {rel}")
            _atomic_write(target, data)
            entries = {k: dict(v) for k, v in current.entries.items()}
            entries.setdefault(str(record.id), {})[str(record.version)] = IndexEntry(
                digest_bytes(data), record.kind, rel
            )
            updated = replace(current, entries=entries)
            self._write_index(updated)
            self._index = updated
            return updated

    def yank(self, rid: Union[RecordId, str], version: Union[Version, str]) -> RegistryIndex:
        rid = as_record_id(rid)
        version = version if isinstance(version, Version) else parse_version(version)
        with self._lock:
            current = self._read_index()
            entry = current.get(rid, version)
            if entry is None:
                raise NotFoundError(f"{rid}@{version} not found in {self.name}")
            entries = {k: dict(v) for k, v in current.entries.items()}
            entries[str(rid)][str(version)] = replace(entry, yanked=True)
            updated = replace(current, entries=entries)
            self._write_index(updated)
            self._index = updated
            return updated


def init_local(path: Union[str, Path], name: Optional[str] = None, trust: str = "private") -> LocalSource:
    """Create an empty registry at ``path`` (no-op if one exists)."""
    path = Path(path)
    (path / "records").mkdir(parents=True, exist_ok=True)
    if not (path / INDEX_FILE).exists():
        _atomic_write(
            path / INDEX_FILE,
            RegistryIndex(generated_at=_now(), advisories_digest=AdvisoryDatabase().digest).serialize(),
        )
    return LocalSource(path, name=name, trust=trust)


def open_local(path: Union[str, Path], name: Optional[str] = None, trust: str = "private") -> LocalSource:
    return LocalSource(path, name=name, trust=trust)


class HttpSource(Source):
    def __init__(
        self,
        base_url: str,
        name: Optional[str] = None,
        trust: str = "public",
        retries: int = 3,
        timeout: float = 10.0,
        backoff: float = 0.1,
        client: Optional[httpx.Client] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.location = self.base_url
        self.name = name or self.base_url
        self.trust = trust
        self.retries = max(1, retries)
        self.backoff = backoff
        self._client = client or httpx.Client(base_url=self.base_url, timeout=timeout)
        self._index: Optional[RegistryIndex] = None
        self._etag: Optional[str] = None

    def _request(self, method: str, url: str, **kw) -> httpx.Response:
        last: Optional[Exception] = None
        for attempt in range(1, self.retries + 1):
            try:
                return self._client.request(method, url, **kw)
            except httpx.TransportError as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * attempt)
        raise TransportError(f"{self.name}: {method} {url} failed: {last}", attempts=self.retries)

    def index(self) -> RegistryIndex:
        if self._index is None:
            return self.refresh()
        return self._index

    def refresh(self) -> RegistryIndex:
        """Re-poll the index with a conditional GET."""
        headers = {"If-None-Match": self._etag} if self._etag and self._index is not None else {}
        resp = self._request("GET", "/v1/index", headers=headers)
        if resp.status_code == 304 and self._index is not None:
            return self._index
        if resp.status_code != 200:
            raise RegistryError(f"{self.name}: GET /v1/index returned {resp.status_code}")
        self._index = RegistryIndex.parse(resp.content)
        self._etag = resp.headers.get("ETag")
        return self._index

    def fetch_raw(self, rid: RecordId, version: Version) -> tuple[bytes, IndexEntry]:
        entry = self.index().get(rid, version)
        if entry is None:
            raise NotFoundError(f"{rid}@{version} not found in {self.name}")
        resp = self._request("GET", f"/v1/records/{rid}/{version}")
        if resp.status_code == 404:
            raise NotFoundError(f"{rid}@{version} not found in {self.name}")
        if resp.status_code != 200:
            raise RegistryError(f"{self.name}: GET record {rid}@{version} returned {resp.status_code}")
        actual = digest_bytes(resp.content)
        if actual != entry.digest:
            raise IntegrityError(f"{rid}@{version} from {self.name}", entry.digest, actual)
        return resp.content, entry

    def advisories(self) -> AdvisoryDatabase:
        resp = self._request("GET", "/v1/advisories")
        if resp.status_code != 200:
            raise RegistryError(f"{self.name}: GET /v1/advisories returned {resp.status_code}")
        return load_advisories(resp.content)

    def publish(self, record: Union[ModelRecord, bytes]) -> dict:
        body = record if isinstance(record, bytes) else canonicalize(record)
        resp = self._request(
            "POST", "/v1/records", content=body, headers={"Content-Type": MANIFEST_MEDIA_TYPE}
        )
        if resp.status_code == 201:
            self._index = None
            return resp.json()
        detail = _json_or_text(resp)
        if resp.status_code == 409:
            raise ImmutableVersionError(detail.get("id", "?"), detail.get("version", "?"))
        if resp.status_code == 422:
            raise RecordError(
                [Violation(v.get("severity", "error"), v.get("path", ""), v.get("message", "")) for v in detail.get("violations", [])]
                or [Violation("error", "", str(detail.get("detail", "rejected")))]
            )
        raise RegistryError(f"{self.name}: publish failed with {resp.status_code}: {detail.get('detail', detail)}")

    def close(self) -> None:
        self._client.close()


def _json_or_text(resp: httpx.Response) -> dict:
    try:
        data = resp.json()
        return data if isinstance(data, dict) else {"detail": data}
    except ValueError:
        return {"detail": resp.text}


# -- merged views --------------------------------------------------------------


class RegistryView:
    """Ordered sources; the first source holding any version of an id owns it.

    Calling the view is a resolver: ``view(id, req)`` returns the highest
    non-yanked matching record from the owning source, or ``None``. Exact
    requirements may still resolve a yanked version so existing graphs keep
    resolving.
    """

    def __init__(self, sources: Iterable[Source]):
        self.sources = list(sources)
        if not self.sources:
            raise RegistryError("a registry view needs at least one source")
        names = [s.name for s in self.sources]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise RegistryError(f"duplicate source names: {', '.join(dupes)}")
        self.shadow_events: list[tuple[str, str, str]] = []
        self._warned: set = set()

    def owner(self, rid: Union[RecordId, str]) -> Optional[Source]:
        rid = as_record_id(rid)
        owner = None
        for s in self.sources:
            if s.has(rid):
                if owner is None:
                    owner = s
                elif (str(rid), s.name) not in self._warned:
                    self._warned.add((str(rid), s.name))
                    self.shadow_events.append((str(rid), owner.name, s.name))
                    warnings.warn(
                        ShadowWarning(f"{rid} in {s.name} is shadowed by {owner.name}"), stacklevel=3
                    )
        return owner

    def lookup(self, rid: Union[RecordId, str], req: VersionReq) -> Optional[ModelRecord]:
        rid = as_record_id(rid)
        source = self.owner(rid)
        if source is None:
            return None
        versions = source.versions(rid)
        eligible = [v for v, e in versions.items() if not e.yanked or req.kind == "exact"]
        v = best_match(req, eligible)
        if v is None:
            return None
        return source.fetch_record(rid, v)

    __call__ = lookup

    def fetch(self, rid: Union[RecordId, str], version: Union[Version, str]) -> ModelRecord:
        source = self.owner(rid)
        if source is None:
            raise NotFoundError(f"{rid} not found in any source")
        return source.fetch_record(rid, version)

    def records(self) -> list[ModelRecord]:
        """Every record visible through the view (owner sources only)."""
        out = []
        seen: set = set()
        for s in self.sources:
            for rid in sorted(s.index().entries):
                if rid in seen:
                    continue
                if self.owner(rid) is not s:
                    continue
                seen.add(rid)
                for v in sorted(s.versions(rid), key=Version.sort_key):
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", YankedWarning)
                        out.append(s.fetch_record(rid, v))
        return out

    def advisories(self) -> AdvisoryDatabase:
        db = AdvisoryDatabase()
        for s in self.sources:
            db = db.merged(s.advisories())
        return db

    def source(self, name: str) -> Source:
        for s in self.sources:
            if s.name == name:
                return s
        raise RegistryError(f"no source named {name!r}")


def merge_view(sources: Iterable[Source]) -> RegistryView:
    return RegistryView(sources)


def fetch_record(source: Source, rid, version) -> ModelRecord:
    return source.fetch_record(rid, version)


def publish(source: Source, record: ModelRecord):
    return source.publish(record)


def yank(source: Source, rid, version):
    return source.yank(rid, version)


def open_source(location: str, name: Optional[str] = None, trust: Optional[str] = None) -> Source:
    if location.startswith(("http://", "https://")):
        return HttpSource(location, name=name, trust=trust or "public")
    return LocalSource(location, name=name, trust=trust or "private")


@dataclass(frozen=True)
class SourceSpec:
    name: str
    location: str
    trust: str


def load_config(path: Union[str, Path]) -> list[SourceSpec]:
    path = Path(path)
    tree = syntax.load(path.read_bytes())
    if not isinstance(tree, dict) or not isinstance(tree.get("sources"), list):
        raise RegistryError(f"{path}: expected a 'sources' list")
    specs = []
    for i, s in enumerate(tree["sources"]):
        if not isinstance(s, dict) or not isinstance(s.get("location"), str) or not isinstance(s.get("name"), str):
            raise RegistryError(f"{path}: sources[{i}] needs string name and location")
        trust = s.get("trust", "public")
        if trust not in TRUST_LEVELS:
            raise RegistryError(f"{path}: sources[{i}].trust must be public or private")
        loc = s["location"]
        if not loc.startswith(("http://", "https://")) and not os.path.isabs(loc):
            loc = str((path.parent / loc).resolve())
        specs.append(SourceSpec(s["name"], loc, trust))
    return specs


def view_from_environment(
    config: Optional[Union[str, Path]] = None,
    env: Optional[dict] = None,
    cwd: Optional[Union[str, Path]] = None,
) -> RegistryView:
    """Sources from ``umr-config.yaml``, with ``UMR_REGISTRY`` prepended."""
    env = os.environ if env is None else env
    specs: list[SourceSpec] = []
    if config is None:
        candidate = Path(cwd or ".") / CONFIG_FILE
        config = candidate if candidate.exists() else None
    if config is not None:
        specs.extend(load_config(config))
    extra = env.get("UMR_REGISTRY")
    if extra:
        name = "UMR_REGISTRY"
        specs.insert(0, SourceSpec(name, extra, "private"))
    if not specs:
        raise RegistryError(f"no registry configured: create {CONFIG_FILE} or set UMR_REGISTRY")
    return RegistryView(open_source(s.location, s.name, s.trust) for s in specs)
