"""String metadata extraction for indexing."""
from __future__ import annotations

import re

from .dataset import DicomDataset, decode_text
from .errors import DecodeError
from .tags import Tag, keyword_of

_DATE_DOTTED = re.compile(r"^(\d{4})\.(\d{2})\.(\d{2})$")


def extract_metadata(ds: DicomDataset, attributes: list[Tag]) -> dict[str, str]:
    """Decoded values keyed by dictionary keyword; absent tags omitted.

    DA values are normalized to YYYYMMDD; trailing pad characters are
    stripped. Binary VRs (OB/OW/SQ/UN) are skipped rather than decoded.
    """
    out: dict[str, str] = {}
    for tag in attributes:
        el = ds.get(tag)
        if el is None:
            continue
        name = keyword_of(tag) or str(tag)
        if el.vr in ("SQ", "OB", "OW", "UN"):
            continue
        value = decode_text(el)
        if el.vr == "DA":
            value = _normalize_date(value, tag)
        out[name] = value
    return out


def _normalize_date(value: str, tag: Tag) -> str:
    if value == "":
        return value
    m = _DATE_DOTTED.match(value)
    if m:
        value = "".join(m.groups())
    if not re.fullmatch(r"\d{8}", value):
        raise DecodeError(f"{tag}: DA value {value!r} is not YYYYMMDD")
    return value
