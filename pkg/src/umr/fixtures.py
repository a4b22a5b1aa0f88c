"""Bundled demo record sets.

``healthcare`` encodes the PLIP case study: PLIP fine-tuned from CLIP on a
LAION-5B subset and Twitter pathology data, and four published models that
use PLIP. ``llava`` is a small illustrative LLaVA-1.6 lineage used for
rendering demos; its edge list is simplified.
"""

from __future__ import annotations

import shutil
from importlib import resources
from pathlib import Path
from typing import Union

from umr.record import ModelRecord, parse_record
from umr.registry import ADVISORY_FILE, LocalSource, init_local

FIXTURES = ("healthcare", "llava")


def fixture_dir(name: str) -> Path:
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; expected one of {', '.join(FIXTURES)}")
    return Path(str(resources.files("umr") / "data" / name))


def fixture_records(name: str) -> list[ModelRecord]:
    d = fixture_dir(name)
    return [parse_record(p.read_bytes()) for p in sorted(d.glob("*.umr.yaml")) if p.name != ADVISORY_FILE]


def build_registry(name: str, path: Union[str, Path], source_name: str | None = None) -> LocalSource:
    """Create a local registry at ``path`` holding every record of a fixture."""
    path = Path(path)
    adv = fixture_dir(name) / ADVISORY_FILE
    path.mkdir(parents=True, exist_ok=True)
    if adv.exists():
        shutil.copyfile(adv, path / ADVISORY_FILE)
    source = init_local(path, name=source_name or name)
    for r in fixture_records(name):
        source.publish(r)
    return source
