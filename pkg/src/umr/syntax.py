"""The manifest surface syntax: a restricted YAML subset.

Allowed: block or flow maps and lists, plain or quoted scalars. Rejected:
anchors/aliases, explicit tags, multiple documents, duplicate keys and
non-string keys. Implicit typing is narrowed to YAML 1.2 core semantics:
``true``/``false``, ``null``/``~``, decimal ints and floats; everything else
(dates, ``yes``/``no``, octal...) stays a string.

:func:`dump` is the canonical emitter used for integrity digests: keys are
sorted at every level, strings are always double-quoted, indentation is two
spaces and lines end with LF.
"""

from __future__ import annotations

import math
import re
from typing import Any

import yaml
from yaml.events import AliasEvent

from umr.errors import ManifestSyntaxError

__all__ = ["load", "dump"]


class _Loader(yaml.SafeLoader):
    yaml_implicit_resolvers: dict = {}

    def compose_node(self, parent, index):
        if self.check_event(AliasEvent):
            event = self.peek_event()
            raise yaml.composer.ComposerError(
                None, None, "aliases are not allowed", event.start_mark
            )
        event = self.peek_event()
        if getattr(event, "anchor", None) is not None:
            raise yaml.composer.ComposerError(
                None, None, "anchors are not allowed", event.start_mark
            )
        tag = getattr(event, "tag", None)
        if tag is not None and tag != "!":
            raise yaml.composer.ComposerError(
                None, None, f"explicit tags are not allowed ({tag})", event.start_mark
            )
        return super().compose_node(parent, index)

    def construct_mapping(self, node, deep=False):
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if not isinstance(key, str):
                raise yaml.constructor.ConstructorError(
                    None, None, f"mapping keys must be strings, got {key!r}", key_node.start_mark
                )
            if key in seen:
                raise yaml.constructor.ConstructorError(
                    None, None, f"duplicate key {key!r}", key_node.start_mark
                )
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:bool", re.compile(r"^(?:true|True|TRUE|false|False|FALSE)$"), list("tTfF")
)
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:null", re.compile(r"^(?:~|null|Null|NULL|)$"), ["~", "n", "N", ""]
)
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:int", re.compile(r"^[-+]?(?:0|[1-9][0-9]*)$"), list("-+0123456789")
)
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:(?:[0-9]+\.[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?|[0-9]+[eE][-+]?[0-9]+)$"),
    list("-+0123456789."),
)


def _construct_int(loader, node):
    return int(loader.construct_scalar(node))


def _construct_float(loader, node):
    return float(loader.construct_scalar(node))


_Loader.add_constructor("tag:yaml.org,2002:int", _construct_int)
_Loader.add_constructor("tag:yaml.org,2002:float", _construct_float)


def load(data: bytes | str) -> Any:
    """Parse manifest text. Empty input yields ``None``."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ManifestSyntaxError(f"input is not valid UTF-8: {exc.reason} at byte {exc.start}") from exc
    else:
        text = data
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        problem = exc.problem or str(exc)
        if mark is None:
            raise ManifestSyntaxError(problem) from exc
        raise ManifestSyntaxError(problem, mark.line + 1, mark.column + 1) from exc
    except yaml.YAMLError as exc:
        raise ManifestSyntaxError(str(exc)) from exc


# -- canonical emitter -------------------------------------------------------

_PLAIN_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED_KEYS = {"true", "True", "TRUE", "false", "False", "FALSE", "null", "Null", "NULL"}
_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _printable(ch: str) -> bool:
    o = ord(ch)
    return 0x20 <= o <= 0x7E or 0xA0 <= o <= 0xD7FF or 0xE000 <= o <= 0xFFFD or o >= 0x10000


def quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif _printable(ch) and ch not in "\u2028\u2029\ufeff":
            out.append(ch)
        elif ord(ch) <= 0xFFFF:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(f"\\U{ord(ch):08x}")
    out.append('"')
    return "".join(out)


def _key(k: str) -> str:
    if _PLAIN_KEY.match(k) and k not in _RESERVED_KEYS:
        return k
    return quote(k)


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    text = repr(x)
    if "e" in text or "E" in text:
        mant, _, exp = text.partition("e")
        if "." not in mant:
            mant += ".0"
        return f"{mant}e{exp}"
    if "." not in text:
        text += ".0"
    return text


def _scalar(v: Any) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _float(v)
    if isinstance(v, str):
        return quote(v)
    raise TypeError(f"cannot serialize {type(v).__name__} value {v!r}")


def _emit(value: Any, indent: int, lines: list[str]) -> None:
    pad = " " * indent
    if isinstance(value, dict):
        for k in sorted(value):
            if not isinstance(k, str):
                raise TypeError(f"mapping keys must be strings, got {k!r}")
            child = value[k]
            if isinstance(child, (dict, list, tuple)) and child:
                lines.append(f"{pad}{_key(k)}:")
                _emit(child, indent + 2, lines)
            else:
                lines.append(f"{pad}{_key(k)}: {_inline(child)}")
    elif isinstance(value, (list, tuple)):
        for item in value:
            if isinstance(item, dict) and item:
                sub: list[str] = []
                _emit(item, indent + 2, sub)
                sub[0] = f"{pad}- " + sub[0][indent + 2:]
                lines.extend(sub)
            elif isinstance(item, (list, tuple)) and item:
                lines.append(f"{pad}-")
                _emit(item, indent + 2, lines)
            else:
                lines.append(f"{pad}- {_inline(item)}")
    else:
        lines.append(pad + _scalar(value))


def _inline(v: Any) -> str:
    if isinstance(v, dict):
        return "{}"
    if isinstance(v, (list, tuple)):
        return "[]"
    return _scalar(v)


def dump(value: Any) -> bytes:
    """Canonical UTF-8 serialization of a tree of dicts, lists and scalars."""
    lines: list[str] = []
    if isinstance(value, (dict, list, tuple)) and not value:
        lines.append(_inline(value))
    else:
        _emit(value, 0, lines)
    return ("\n".join(lines) + "\n").encode("utf-8")
