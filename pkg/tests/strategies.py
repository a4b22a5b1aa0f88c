"""Hypothesis strategies producing valid records."""

from __future__ import annotations

from hypothesis import strategies as st

from umr.record import (
    ARTIFACT_KEYS,
    AVAILABILITY,
    DATA_RELATIONS,
    MODEL_RELATIONS,
    TOP_LEVEL_KEYS,
    Artifact,
    DependencyRef,
    EvaluationResult,
    Maintainer,
    ModelRecord,
    RecordId,
)
from umr.versioning import Version, parse_req

text = st.text(st.characters(exclude_categories=("Cs",)), max_size=40)
token = st.from_regex(r"[a-z0-9][a-z0-9._-]{0,15}", fullmatch=True)
record_ids = st.builds(RecordId, st.none() | token, token)
idents = st.one_of(st.integers(0, 99).map(str), st.from_regex(r"[a-zA-Z-][0-9a-zA-Z-]{0,5}", fullmatch=True))
versions = st.builds(
    Version,
    st.integers(0, 20),
    st.integers(0, 20),
    st.integers(0, 20),
    st.lists(idents, max_size=2).map(tuple),
    st.sampled_from(["", "build.1", "date.20240101"]),
)
reqs = st.sampled_from(["*", "=1.0.0", "^1.2.0", "~0.3.1", "2.*", ">=1.0.0,<3.0.0", "^2.0.0-rc.1", "1.4.*"]).map(parse_req)
licenses = st.sampled_from(["MIT", "Apache-2.0", "CC-BY-4.0", "unknown", "proprietary", "MIT OR Apache-2.0", "GPL-2.0 WITH Classpath-exception-2.0"])
finite = st.floats(allow_nan=False, allow_infinity=False)
json_scalars = st.none() | st.booleans() | st.integers(-(10**9), 10**9) | finite | text
json_trees = st.recursive(
    json_scalars,
    lambda c: st.lists(c, max_size=3) | st.dictionaries(text, c, max_size=3),
    max_leaves=8,
)
extra_keys = text.filter(lambda k: k not in TOP_LEVEL_KEYS)

maintainers = st.builds(Maintainer, text.filter(bool), st.none() | text)
artifacts = st.dictionaries(
    st.sampled_from(ARTIFACT_KEYS),
    st.builds(Artifact, st.sampled_from(AVAILABILITY), st.none() | text),
    max_size=4,
)
evaluations = st.one_of(
    st.builds(EvaluationResult, text.filter(bool), finite, st.booleans(), st.none() | record_ids, st.none() | text, st.none() | text),
    st.builds(EvaluationResult, text.filter(bool), st.none(), st.booleans(), st.none() | record_ids, text.filter(bool), st.none() | text),
)


@st.composite
def dependencies(draw, owner: RecordId, owner_kind: str):
    out = []
    seen = set()
    for _ in range(draw(st.integers(0, 5))):
        target = draw(record_ids)
        if target == owner:
            continue
        if owner_kind == "dataset":
            kind, relation = draw(st.sampled_from(["dataset", "model"])), draw(st.sampled_from(["derived_from", "other"]))
        else:
            kind = draw(st.sampled_from(["model", "dataset"]))
            pool = sorted(MODEL_RELATIONS) + ["derived_from", "other"] if kind == "model" else sorted(DATA_RELATIONS) + ["derived_from", "other"]
            relation = draw(st.sampled_from(pool))
        if (target, kind, relation) in seen:
            continue
        seen.add((target, kind, relation))
        out.append(DependencyRef(target, kind, draw(reqs), relation, draw(st.none() | text)))
    return tuple(out)


@st.composite
def records(draw, kind=None) -> ModelRecord:
    rid = draw(record_ids)
    kind = kind or draw(st.sampled_from(["model", "dataset"]))
    return ModelRecord(
        id=rid,
        version=draw(versions),
        kind=kind,
        license=draw(licenses),
        title=draw(text),
        publisher=draw(text),
        maintainers=tuple(draw(st.lists(maintainers, max_size=3))),
        artifacts=draw(artifacts),
        dependencies=draw(dependencies(rid, kind)),
        evaluations=tuple(draw(st.lists(evaluations, max_size=3))),
        intended_use=draw(text),
        ethical_notes=draw(text),
        references=tuple(draw(st.lists(text, max_size=3))),
        extra=draw(st.dictionaries(extra_keys, json_trees, max_size=2)),
    )


def model_records():
    return records(kind="model")
