"""Cohort queries: a conjunction of predicates over indexed attributes."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..dicom.tags import KEYWORD_TO_TAG, Tag
from .errors import UnknownAttribute

# The fixed attribute set extracted into the index at ingest time.
INDEXED_ATTRIBUTES: tuple[str, ...] = (
    "PatientID",
    "PatientName",
    "Modality",
    "StudyDate",
    "StudyInstanceUID",
    "SeriesInstanceUID",
    "SOPInstanceUID",
    "SeriesDescription",
    "BodyPartExamined",
    "Rows",
    "Columns",
    "InstanceNumber",
)

INDEX_TAGS: tuple[Tag, ...] = tuple(KEYWORD_TO_TAG[name] for name in INDEXED_ATTRIBUTES)

TAG_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


@dataclass(frozen=True)
class Equals:
    attr: str
    value: str


@dataclass(frozen=True)
class Prefix:
    attr: str
    value: str


@dataclass(frozen=True)
class DateRange:
    attr: str
    start: str  # YYYYMMDD, inclusive
    end: str  # YYYYMMDD, inclusive


@dataclass(frozen=True)
class In:
    attr: str
    values: frozenset[str]

    def __init__(self, attr: str, values) -> None:
        object.__setattr__(self, "attr", attr)
        object.__setattr__(self, "values", frozenset(values))


@dataclass(frozen=True)
class HasTag:
    tag: str


Predicate = Equals | Prefix | DateRange | In | HasTag


@dataclass(frozen=True)
class CohortQuery:
    predicates: tuple[Predicate, ...] = ()

    def __init__(self, predicates=()) -> None:
        object.__setattr__(self, "predicates", tuple(predicates))

    def validate(self) -> None:
        for p in self.predicates:
            if isinstance(p, HasTag):
                continue
            if p.attr not in INDEXED_ATTRIBUTES:
                raise UnknownAttribute(p.attr)


def matches(pred: Predicate, attrs: dict[str, str], tags: frozenset[str] | set[str]) -> bool:
    """One instance against one predicate; conjunction is the caller's loop."""
    if isinstance(pred, Equals):
        return attrs.get(pred.attr) == pred.value
    if isinstance(pred, Prefix):
        value = attrs.get(pred.attr)
        return value is not None and value.startswith(pred.value)
    if isinstance(pred, DateRange):
        value = attrs.get(pred.attr)
        return value is not None and pred.start <= value <= pred.end
    if isinstance(pred, In):
        return attrs.get(pred.attr) in pred.values
    if isinstance(pred, HasTag):
        return pred.tag in tags
    raise TypeError(f"not a predicate: {pred!r}")


def query_matches(q: CohortQuery, attrs: dict[str, str],
                  tags: frozenset[str] | set[str]) -> bool:
    return all(matches(p, attrs, tags) for p in q.predicates)


# -- JSON form (used by the HTTP API and cohort persistence) ---------------


def query_to_json(q: CohortQuery) -> dict:
    out = []
    for p in q.predicates:
        if isinstance(p, Equals):
            out.append({"kind": "equals", "attr": p.attr, "value": p.value})
        elif isinstance(p, Prefix):
            out.append({"kind": "prefix", "attr": p.attr, "value": p.value})
        elif isinstance(p, DateRange):
            out.append({"kind": "date_range", "attr": p.attr,
                        "start": p.start, "end": p.end})
        elif isinstance(p, In):
            out.append({"kind": "in", "attr": p.attr,
                        "values": sorted(p.values)})
        elif isinstance(p, HasTag):
            out.append({"kind": "has_tag", "tag": p.tag})
        else:
            raise TypeError(f"not a predicate: {p!r}")
    return {"predicates": out}


def query_from_json(doc: dict) -> CohortQuery:
    if not isinstance(doc, dict) or not isinstance(doc.get("predicates", []), list):
        raise ValueError("query document must be {'predicates': [...]}")
    preds: list[Predicate] = []
    for item in doc.get("predicates", []):
        kind = item.get("kind")
        if kind == "equals":
            preds.append(Equals(_s(item, "attr"), _s(item, "value")))
        elif kind == "prefix":
            preds.append(Prefix(_s(item, "attr"), _s(item, "value")))
        elif kind == "date_range":
            preds.append(DateRange(_s(item, "attr"), _s(item, "start"), _s(item, "end")))
        elif kind == "in":
            values = item.get("values")
            if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
                raise ValueError("'in' predicate needs a list of string values")
            preds.append(In(_s(item, "attr"), values))
        elif kind == "has_tag":
            preds.append(HasTag(_s(item, "tag")))
        else:
            raise ValueError(f"unknown predicate kind {kind!r}")
    return CohortQuery(tuple(preds))


def _s(item: dict, key: str) -> str:
    value = item.get(key)
    if not isinstance(value, str):
        raise ValueError(f"predicate field {key!r} must be a string")
    return value
