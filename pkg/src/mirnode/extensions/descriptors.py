"""Operator descriptors: JSON files registering external-command operators.

Descriptors never carry code; they bind a name and slot signature to an
argv template executed through the workflow engine's exchange-directory
protocol ("{exchange}" is substituted with the per-node directory).
"""
from __future__ import annotations

import json
import re

from ..workflow import OperatorSpec
from .errors import SchemaError

OPERATOR_NAME_RE = re.compile(r"^[a-z0-9_-]{1,64}$")

_FIELDS = {"name", "inputs", "outputs", "argv"}
_SLOT_FIELDS = {"name", "kind"}


def parse_operator_descriptor(raw: bytes) -> OperatorSpec:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"descriptor is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("descriptor must be a JSON object")
    unknown = sorted(set(doc) - _FIELDS)
    if unknown:
        raise SchemaError(f"unknown descriptor field {unknown[0]!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not OPERATOR_NAME_RE.match(name):
        raise SchemaError(f"descriptor name {name!r} must match"
                          " [a-z0-9_-]{1,64}")
    argv = doc.get("argv")
    if (not isinstance(argv, list) or not argv
            or not all(isinstance(a, str) and a for a in argv)):
        raise SchemaError(f"{name}: 'argv' must be a non-empty list of strings")
    try:
        return OperatorSpec(
            name=name,
            input_slots=_slots(doc.get("inputs", []), f"{name}.inputs"),
            output_slots=_slots(doc.get("outputs", []), f"{name}.outputs"),
            execution="external-command",
            argv=tuple(argv),
        )
    except ValueError as exc:  # duplicate slot name / unknown kind
        raise SchemaError(str(exc)) from exc


def _slots(value, label: str) -> tuple[tuple[str, str], ...]:
    if not isinstance(value, list):
        raise SchemaError(f"'{label}' must be a list")
    slots = []
    for i, item in enumerate(value):
        if not isinstance(item, dict) or set(item) != _SLOT_FIELDS:
            raise SchemaError(f"{label}[{i}] must have exactly name and kind")
        slot_name, kind = item["name"], item["kind"]
        if not isinstance(slot_name, str) or not OPERATOR_NAME_RE.match(slot_name):
            raise SchemaError(f"{label}[{i}].name invalid: {slot_name!r}")
        if not isinstance(kind, str):
            raise SchemaError(f"{label}[{i}].kind must be a string")
        slots.append((slot_name, kind))
    return tuple(slots)


def descriptor_to_json(spec: OperatorSpec) -> dict:
    return {
        "name": spec.name,
        "inputs": [{"name": n, "kind": k} for n, k in spec.input_slots],
        "outputs": [{"name": n, "kind": k} for n, k in spec.output_slots],
        "argv": list(spec.argv),
    }
