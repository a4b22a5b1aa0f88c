"""Semantic versions and version requirements.

Versions follow semver 2.0.0. Requirements use a small grammar::

    *            any release
    =1.2.3       exactly 1.2.3 (a bare ``1.2.3`` means the same)
    =0.0.0+b.1   exactly that build; without build metadata any build matches
    ^1.2.3       compatible updates, [1.2.3, 2.0.0)
    ~1.2.3       patch updates, [1.2.3, 1.3.0)
    1.2.*        wildcard, [1.2.0, 1.3.0)
    >=1.0.0,<2.0.0   comma-conjoined comparators

Prerelease versions only match a requirement that itself names a
prerelease of the same ``major.minor.patch``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from umr.errors import VersionError

__all__ = [
    "Version",
    "VersionReq",
    "parse_version",
    "parse_req",
    "matches",
    "best_match",
    "dataset_snapshot_version",
]

_NUM = r"(0|[1-9][0-9]*)"
_IDENT = r"[0-9A-Za-z-]+"
_VERSION_RE = re.compile(
    rf"^{_NUM}\.{_NUM}\.{_NUM}"
    rf"(?:-({_IDENT}(?:\.{_IDENT})*))?"
    rf"(?:\+({_IDENT}(?:\.{_IDENT})*))?$"
)


@dataclass(frozen=True)
class Version:
    """A semver 2.0.0 version.

    Equality and hashing are field-wise (build metadata included) so that
    two records differing only in build metadata stay distinct. The
    ordering operators use semver precedence, where build is ignored; use
    :meth:`precedence` to compare for precedence-equality.
    """

    major: int
    minor: int
    patch: int
    prerelease: tuple[str, ...] = ()
    build: str = ""

    @property
    def is_prerelease(self) -> bool:
        return bool(self.prerelease)

    @property
    def core(self) -> tuple[int, int, int]:
        return (self.major, self.minor, self.patch)

    def precedence(self) -> tuple:
        # A release sorts above every prerelease of the same core: (1,) > (0, ...).
        if not self.prerelease:
            return (self.core, (1,))
        idents = tuple(
            (0, int(p), "") if p.isdigit() else (1, 0, p) for p in self.prerelease
        )
        return (self.core, (0, idents))

    def sort_key(self) -> tuple:
        """Total, deterministic key: precedence first, then build string."""
        return (self.precedence(), self.build)

    def release(self) -> "Version":
        return Version(self.major, self.minor, self.patch)

    def __lt__(self, other: "Version") -> bool:
        return self.precedence() < other.precedence()

    def __le__(self, other: "Version") -> bool:
        return self.precedence() <= other.precedence()

    def __gt__(self, other: "Version") -> bool:
        return self.precedence() > other.precedence()

    def __ge__(self, other: "Version") -> bool:
        return self.precedence() >= other.precedence()

    def __str__(self) -> str:
        text = f"{self.major}.{self.minor}.{self.patch}"
        if self.prerelease:
            text += "-" + ".".join(self.prerelease)
        if self.build:
            text += "+" + self.build
        return text


def _first_bad_span(text: str) -> tuple[int, int]:
    """Best-effort location of the offending part of a malformed version.

    An empty trailing identifier yields an empty span at the end of the text.
    """
    lo, hi = _locate(text)
    return min(lo, len(text)), min(hi, len(text))


def _locate(text: str) -> tuple[int, int]:
    m = re.match(r"[0-9A-Za-z.+-]*", text)
    end = m.end() if m else 0
    if end < len(text):
        return (end, end + 1)
    head, _, rest = text.partition("+")
    core, _, pre = head.partition("-")
    pos = 0
    for part in core.split("."):
        if part == "" or not part.isdigit() or (len(part) > 1 and part[0] == "0"):
            return (pos, pos + max(len(part), 1))
        pos += len(part) + 1
    if core.count(".") != 2:
        return (0, len(core))
    offset = len(core) + 1
    for ident in pre.split(".") if "-" in head else []:
        if ident == "" or (ident.isdigit() and len(ident) > 1 and ident[0] == "0"):
            return (offset, offset + max(len(ident), 1))
        offset += len(ident) + 1
    offset = len(head) + 1
    for ident in rest.split(".") if "+" in text else []:
        if ident == "":
            return (offset, offset + 1)
        offset += len(ident) + 1
    return (0, len(text))


def parse_version(text: str) -> Version:
    """Parse a semver string; raise :class:`VersionError` naming the bad span."""
    if not isinstance(text, str):
        raise VersionError(f"version must be a string, got {type(text).__name__}")
    m = _VERSION_RE.match(text)
    if m is None:
        raise VersionError(f"malformed version {text!r}", text=text, span=_first_bad_span(text))
    major, minor, patch, pre, build = m.groups()
    prerelease: tuple[str, ...] = ()
    if pre:
        prerelease = tuple(pre.split("."))
        offset = len(f"{major}.{minor}.{patch}-")
        for ident in prerelease:
            if ident.isdigit() and len(ident) > 1 and ident[0] == "0":
                raise VersionError(
                    f"malformed version {text!r}: numeric prerelease identifier "
                    f"{ident!r} has a leading zero",
                    text=text,
                    span=(offset, offset + len(ident)),
                )
            offset += len(ident) + 1
    return Version(int(major), int(minor), int(patch), prerelease, build or "")


def dataset_snapshot_version(yyyymmdd: str) -> Version:
    """Sentinel version for a date-stamped, unversioned dataset snapshot."""
    if not re.fullmatch(r"[0-9]{8}", yyyymmdd):
        raise VersionError(f"snapshot date must be YYYYMMDD, got {yyyymmdd!r}")
    return Version(0, 0, 0, (), f"date.{yyyymmdd}")


# -- requirements -----------------------------------------------------------

_OPS = (">=", "<=", ">", "<", "=")


@dataclass(frozen=True)
class Bound:
    version: Version
    inclusive: bool


def _tighter_lower(a: Optional[Bound], b: Bound) -> Bound:
    if a is None:
        return b
    if b.version.precedence() != a.version.precedence():
        return b if b.version > a.version else a
    return a if not a.inclusive else b


def _tighter_upper(a: Optional[Bound], b: Bound) -> Bound:
    if a is None:
        return b
    if b.version.precedence() != a.version.precedence():
        return b if b.version < a.version else a
    return a if not a.inclusive else b


@dataclass(frozen=True)
class VersionReq:
    """A parsed requirement.

    ``text`` is the normalized serialization; two requirements compare equal
    iff their normalized text is equal.
    """

    kind: str
    text: str
    lower: Optional[Bound] = field(default=None, compare=False)
    upper: Optional[Bound] = field(default=None, compare=False)
    # (major, minor, patch) cores for which prerelease versions may match.
    prerelease_cores: frozenset = field(default=frozenset(), compare=False)

    def __str__(self) -> str:
        return self.text

    def contains(self, v: Version) -> bool:
        return matches(self, v)

    def is_empty(self) -> bool:
        return not any(matches(self, c) for c in self._witness_candidates())

    def _witness_candidates(self) -> Iterable[Version]:
        # Smallest release inside the bounds, if any.
        if self.lower is None:
            yield Version(0, 0, 0)
        else:
            lo = self.lower.version
            if self.lower.inclusive:
                yield lo
            if lo.is_prerelease:
                yield lo.release()
            elif self.lower.inclusive:
                yield lo.release()
            else:
                yield Version(lo.major, lo.minor, lo.patch + 1)
        # Smallest admissible prerelease for each tagged core.
        for core in self.prerelease_cores:
            yield Version(*core, ("0",))
            for b in (self.lower, self.upper):
                if b is not None and b.version.is_prerelease and b.version.core == core:
                    yield b.version
                    yield Version(*core, b.version.prerelease + ("0",))


def _parse_partial(text: str, allow_wild: bool = False) -> tuple[list[Optional[int]], tuple[str, ...]]:
    """Parse ``1``, ``1.2``, ``1.2.3`` (optionally with prerelease)."""
    core, sep, pre = text.partition("-")
    if sep and pre == "":
        raise VersionError(f"empty prerelease in {text!r}", text=text)
    parts = core.split(".")
    if not 1 <= len(parts) <= 3:
        raise VersionError(f"malformed version {text!r}", text=text, span=(0, len(text)))
    nums: list[Optional[int]] = []
    pos = 0
    for part in parts:
        if allow_wild and part in ("*", "x", "X"):
            nums.append(None)
        elif re.fullmatch(_NUM, part):
            if nums and nums[-1] is None:
                raise VersionError(f"number after wildcard in {text!r}", text=text, span=(pos, pos + len(part)))
            nums.append(int(part))
        else:
            raise VersionError(
                f"malformed version component {part!r} in {text!r}",
                text=text,
                span=(pos, pos + max(len(part), 1)),
            )
        pos += len(part) + 1
    prerelease: tuple[str, ...] = ()
    if sep:
        if len(nums) != 3:
            raise VersionError(f"prerelease requires a full version in {text!r}", text=text)
        prerelease = parse_version(text).prerelease
    return nums, prerelease


def _full(text: str) -> Version:
    v = parse_version(text)
    if v.build:
        raise VersionError(f"build metadata not allowed in requirement {text!r}", text=text)
    return v


def parse_req(text: str) -> VersionReq:
    """Parse a requirement string; raise :class:`VersionError` on bad input."""
    if not isinstance(text, str):
        raise VersionError(f"requirement must be a string, got {type(text).__name__}")
    raw = text.strip()
    if raw == "":
        raise VersionError("empty requirement", text=text)
    if raw == "*":
        return VersionReq("wildcard", "*")

    if "," in raw or raw[0] in "<>":
        return _parse_comparators(raw)

    if raw[0] == "^":
        nums, pre = _parse_partial(raw[1:])
        return _caret(nums, pre, raw)
    if raw[0] == "~":
        nums, pre = _parse_partial(raw[1:])
        return _tilde(nums, pre, raw)

    body = raw[1:] if raw[0] == "=" else raw
    if body and body[0] in "<>=!^~":
        raise VersionError(f"unknown operator in {text!r}", text=text, span=(0, 2))
    if any(ch in body for ch in "*xX") and re.fullmatch(r"[0-9]+(\.[0-9*xX]+)*(\.[*xX])", body):
        nums, _ = _parse_partial(body, allow_wild=True)
        return _wildcard(nums)
    try:
        v = parse_version(body)
    except VersionError as exc:
        if body[:1].isdigit():
            raise
        raise VersionError(f"unknown operator in {text!r}", text=text, span=(0, 1)) from exc
    bound = Bound(v, True)
    cores = frozenset({v.core}) if v.is_prerelease else frozenset()
    return VersionReq("exact", f"={v}", bound, bound, cores)


def _caret(nums: list[Optional[int]], pre: tuple[str, ...], raw: str) -> VersionReq:
    major = nums[0]
    minor = nums[1] if len(nums) > 1 else None
    patch = nums[2] if len(nums) > 2 else None
    lo = Version(major, minor or 0, patch or 0, pre)
    if major > 0 or minor is None:
        hi = Version(major + 1, 0, 0)
    elif minor > 0 or patch is None:
        hi = Version(0, minor + 1, 0)
    else:
        hi = Version(0, 0, patch + 1)
    cores = frozenset({lo.core}) if pre else frozenset()
    return VersionReq("caret", raw, Bound(lo, True), Bound(hi, False), cores)


def _tilde(nums: list[Optional[int]], pre: tuple[str, ...], raw: str) -> VersionReq:
    major = nums[0]
    minor = nums[1] if len(nums) > 1 else None
    patch = nums[2] if len(nums) > 2 else None
    lo = Version(major, minor or 0, patch or 0, pre)
    hi = Version(major + 1, 0, 0) if minor is None else Version(major, minor + 1, 0)
    cores = frozenset({lo.core}) if pre else frozenset()
    return VersionReq("tilde", raw, Bound(lo, True), Bound(hi, False), cores)


def _wildcard(nums: list[Optional[int]]) -> VersionReq:
    fixed = [n for n in nums if n is not None]
    if not fixed:
        return VersionReq("wildcard", "*")
    if len(fixed) == 1:
        lo, hi = Version(fixed[0], 0, 0), Version(fixed[0] + 1, 0, 0)
        text = f"{fixed[0]}.*"
    else:
        lo, hi = Version(fixed[0], fixed[1], 0), Version(fixed[0], fixed[1] + 1, 0)
        text = f"{fixed[0]}.{fixed[1]}.*"
    return VersionReq("wildcard", text, Bound(lo, True), Bound(hi, False))


def _parse_comparators(raw: str) -> VersionReq:
    lower: Optional[Bound] = None
    upper: Optional[Bound] = None
    cores: set = set()
    normalized = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece:
            raise VersionError(f"empty comparator in {raw!r}", text=raw)
        op = next((o for o in _OPS if piece.startswith(o)), None)
        if op is None:
            raise VersionError(f"unknown operator in comparator {piece!r}", text=raw)
        rest = piece[len(op):].strip()
        if rest[:1] in ("<", ">", "=", "!", "^", "~"):
            raise VersionError(f"unknown operator in comparator {piece!r}", text=raw)
        v = _full(rest)
        if v.is_prerelease:
            cores.add(v.core)
        normalized.append(f"{op}{v}")
        if op in (">=", ">", "="):
            lower = _tighter_lower(lower, Bound(v, op != ">"))
        if op in ("<=", "<", "="):
            upper = _tighter_upper(upper, Bound(v, op != "<"))
    if lower is not None and upper is not None:
        lp, up = lower.version.precedence(), upper.version.precedence()
        if lp > up or (lp == up and not (lower.inclusive and upper.inclusive)):
            raise VersionError(f"empty range {raw!r}: lower bound exceeds upper bound", text=raw)
    req = VersionReq("range", ",".join(normalized), lower, upper, frozenset(cores))
    if req.is_empty():
        raise VersionError(f"empty range {raw!r}: no version can satisfy it", text=raw)
    return req


def matches(req: VersionReq, v: Version) -> bool:
    """True iff ``v`` is in the set denoted by ``req``."""
    if v.is_prerelease and v.core not in req.prerelease_cores:
        return False
    if req.kind == "wildcard" and req.lower is None:
        return not v.is_prerelease
    if req.kind == "exact" and req.lower.version.build and v.build != req.lower.version.build:
        return False
    p = v.precedence()
    if req.lower is not None:
        lp = req.lower.version.precedence()
        if p < lp or (p == lp and not req.lower.inclusive):
            return False
    if req.upper is not None:
        up = req.upper.version.precedence()
        if p > up or (p == up and not req.upper.inclusive):
            return False
    return True


def best_match(req: VersionReq, candidates: Iterable[Version]) -> Optional[Version]:
    """Highest-precedence candidate satisfying ``req``, or ``None``."""
    hits = [v for v in candidates if matches(req, v)]
    if not hits:
        return None
    return max(hits, key=Version.sort_key)
