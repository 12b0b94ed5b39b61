"""Sovereignty guard: enforced on both send and receive paths.

Denies any message that exceeds the size cap, contains the DICOM magic
"DICM" or the encoded PixelData tag (E0 7F 10 00) at any byte offset, is not
a JSON object, or is not one of the allowed message kinds. Every deny is
reported to the audit callback.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

ALLOWED_KINDS = frozenset({"control", "parameter-vector", "scalar-metrics", "count"})

DICOM_MAGIC = b"DICM"
PIXEL_DATA_PATTERN = b"\xe0\x7f\x10\x00"  # (7FE0,0010) little-endian

DEFAULT_MAX_BODY = 16 * 1024 * 1024


@dataclass(frozen=True)
class SovereigntyPolicy:
    allowed_kinds: frozenset = ALLOWED_KINDS
    max_body_bytes: int = DEFAULT_MAX_BODY


@dataclass(frozen=True)
class GuardDecision:
    allowed: bool
    reason: str = ""


def guard_message(body: bytes, policy: SovereigntyPolicy,
                  audit=None) -> GuardDecision:
    decision = _evaluate(body, policy)
    if not decision.allowed and audit is not None:
        audit(decision.reason)
    return decision


def _evaluate(body: bytes, policy: SovereigntyPolicy) -> GuardDecision:
    if len(body) > policy.max_body_bytes:
        return GuardDecision(False, f"body of {len(body)} bytes exceeds"
                                    f" {policy.max_body_bytes}")
    if DICOM_MAGIC in body:
        return GuardDecision(False, "DICM marker found")
    if PIXEL_DATA_PATTERN in body:
        return GuardDecision(False, "PixelData tag pattern found")
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return GuardDecision(False, "body is not valid JSON")
    if not isinstance(doc, dict):
        return GuardDecision(False, "body is not a JSON object")
    kind = doc.get("kind")
    if kind not in policy.allowed_kinds:
        return GuardDecision(False, f"message kind {kind!r} not allowed")
    problem = _check_kind(kind, doc)
    if problem:
        return GuardDecision(False, problem)
    return GuardDecision(True)


def _check_kind(kind: str, doc: dict) -> str:
    if kind == "parameter-vector":
        params = doc.get("params")
        if (not isinstance(params, list) or not params
                or not all(_finite_number(v) for v in params)):
            return "'parameter-vector' needs a non-empty list of finite numbers"
    elif kind == "scalar-metrics":
        metrics = doc.get("metrics")
        if (not isinstance(metrics, dict)
                or not all(isinstance(k, str) and _finite_number(v)
                           for k, v in metrics.items())):
            return "'scalar-metrics' needs a map of names to finite numbers"
    elif kind == "count":
        n = doc.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            return "'count' needs a non-negative integer n"
    return ""


def _finite_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))
