"""Core DICOM value types: data elements, datasets, file meta, UIDs."""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

from .errors import DecodeError
from .tags import Tag, vr_of

# Transfer syntaxes the platform supports end to end.
IMPLICIT_VR_LE = "1.2.840.10008.1.2"
EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"
SUPPORTED_TRANSFER_SYNTAXES = frozenset({IMPLICIT_VR_LE, EXPLICIT_VR_LE})

# SOP classes used directly by the platform.
VERIFICATION_SOP_CLASS = "1.2.840.10008.1.1"
CT_IMAGE_STORAGE = "1.2.840.10008.5.1.4.1.1.2"
MR_IMAGE_STORAGE = "1.2.840.10008.5.1.4.1.1.4"
SECONDARY_CAPTURE_STORAGE = "1.2.840.10008.5.1.4.1.1.7"

# Fixed identity for files and associations produced by this implementation.
IMPLEMENTATION_CLASS_UID = "2.25.307266671693305533481936478873247353059"

SUPPORTED_VRS = frozenset({
    "AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT", "PN", "SH", "ST",
    "TM", "UI", "UL", "US", "SS", "SL", "FL", "FD", "OB", "OW", "SQ", "UN",
})
# VRs carrying the 2-byte reserved field + 4-byte length in explicit encoding.
LONG_FORM_VRS = frozenset({"OB", "OW", "SQ", "UN"})
# Text VRs padded with a trailing space to even length; UI pads with NUL.
SPACE_PADDED_VRS = frozenset({
    "AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT", "PN", "SH", "ST", "TM",
})
ASCII_VRS = frozenset({"AE", "AS", "CS", "DA", "DS", "DT", "IS", "TM", "UI"})
FIXED_WIDTH = {"US": 2, "SS": 2, "UL": 4, "SL": 4, "FL": 4, "FD": 8}


def new_uid(rng: random.Random | None = None) -> str:
    """Fresh UID: '2.25.' + decimal rendering of a 128-bit random value."""
    bits = (rng or random).getrandbits(128)
    return f"2.25.{bits}"


@dataclass
class DataElement:
    """One tagged value; SQ elements hold nested item datasets instead of bytes."""

    tag: Tag
    vr: str
    value: bytes | list["DicomDataset"]

    def __post_init__(self) -> None:
        if self.vr not in SUPPORTED_VRS:
            raise ValueError(f"unsupported VR {self.vr!r} for {self.tag}")
        if self.vr == "SQ":
            if not isinstance(self.value, list):
                raise ValueError(f"SQ element {self.tag} requires item list")
            return
        if not isinstance(self.value, (bytes, bytearray)):
            raise ValueError(f"non-SQ element {self.tag} requires bytes")
        # Stored values always carry their even-length encoded form so that a
        # parse/serialize cycle is the identity on the raw bytes.
        raw = bytes(self.value)
        if len(raw) % 2 == 1:
            if self.vr in SPACE_PADDED_VRS:
                raw += b" "
            elif self.vr in ("UI", "OB", "UN"):
                raw += b"\x00"
        self.value = raw

    @property
    def items(self) -> list["DicomDataset"]:
        assert self.vr == "SQ"
        return self.value  # type: ignore[return-value]

    @property
    def raw(self) -> bytes:
        assert self.vr != "SQ"
        return bytes(self.value)  # type: ignore[arg-type]


class DicomDataset:
    """Ordered tag -> element map; iteration is always in ascending tag order."""

    def __init__(self, elements: list[DataElement] | None = None):
        self._elements: dict[Tag, DataElement] = {}
        for el in elements or []:
            self.put(el)

    def put(self, el: DataElement) -> None:
        self._elements[el.tag] = el

    def get(self, tag: Tag) -> DataElement | None:
        return self._elements.get(tag)

    def __contains__(self, tag: Tag) -> bool:
        return tag in self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self):
        return iter(self.elements())

    def elements(self) -> list[DataElement]:
        return [self._elements[t] for t in sorted(self._elements)]

    def tags(self) -> list[Tag]:
        return sorted(self._elements)

    def remove(self, tag: Tag) -> None:
        self._elements.pop(tag, None)

    # -- typed accessors ---------------------------------------------------

    def get_string(self, tag: Tag) -> str | None:
        """Decoded, pad-stripped string for text-like VRs; None when absent."""
        el = self.get(tag)
        if el is None or el.vr == "SQ":
            return None
        return decode_text(el)

    def get_int(self, tag: Tag) -> int | None:
        el = self.get(tag)
        if el is None:
            return None
        if el.vr in ("US", "SS", "UL", "SL"):
            vals = decode_numeric(el)
            return int(vals[0]) if vals else None
        text = self.get_string(tag)
        if text is None or text == "":
            return None
        return int(text.split("\\")[0])

    def get_float(self, tag: Tag) -> float | None:
        text = self.get_string(tag)
        if text is None or text == "":
            return None
        return float(text.split("\\")[0])

    def put_string(self, tag: Tag, vr: str, value: str) -> None:
        self.put(DataElement(tag, vr, value.encode("latin-1")))

    def put_int(self, tag: Tag, vr: str, value: int) -> None:
        if vr == "US":
            raw = struct.pack("<H", value)
        elif vr == "UL":
            raw = struct.pack("<I", value)
        elif vr == "SS":
            raw = struct.pack("<h", value)
        elif vr == "SL":
            raw = struct.pack("<i", value)
        elif vr == "IS":
            raw = str(value).encode("ascii")
        else:
            raise ValueError(f"put_int unsupported for VR {vr}")
        self.put(DataElement(tag, vr, raw))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DicomDataset):
            return NotImplemented
        if self.tags() != other.tags():
            return False
        for tag in self.tags():
            a, b = self._elements[tag], other._elements[tag]
            if a.vr != b.vr:
                return False
            if a.vr == "SQ":
                if a.items != b.items:
                    return False
            elif a.raw != b.raw:
                return False
        return True

    def __repr__(self) -> str:
        return f"DicomDataset({len(self._elements)} elements)"


@dataclass(frozen=True)
class FileMeta:
    """Part-10 file meta group; always encoded Explicit VR Little Endian."""

    transfer_syntax_uid: str
    media_sop_class_uid: str = ""
    media_sop_instance_uid: str = ""
    implementation_class_uid: str = IMPLEMENTATION_CLASS_UID


@dataclass(frozen=True)
class RasterImage:
    """Single MONOCHROME2 frame with unsigned samples."""

    rows: int
    cols: int
    bits_allocated: int
    pixels: "object" = field(repr=False)  # numpy uint8/uint16 array, shape (rows, cols)

    def __post_init__(self) -> None:
        import numpy as np

        px = self.pixels
        if self.bits_allocated not in (8, 16):
            raise ValueError("bits_allocated must be 8 or 16")
        if not isinstance(px, np.ndarray) or px.shape != (self.rows, self.cols):
            raise ValueError("pixels must be a (rows, cols) array")
        if px.size and int(px.max()) >= (1 << self.bits_allocated):
            raise ValueError("sample exceeds bits_allocated range")


def decode_text(el: DataElement) -> str:
    """String value for a non-SQ element, trailing pad characters stripped."""
    if el.vr == "SQ":
        raise DecodeError(f"{el.tag}: SQ has no string value")
    raw = el.raw
    if el.vr == "UI":
        text = _decode_charset(raw, el, ascii_only=True)
        return text.rstrip("\x00")
    if el.vr in SPACE_PADDED_VRS or el.vr == "UN":
        text = _decode_charset(raw, el, ascii_only=el.vr in ASCII_VRS)
        return text.rstrip(" \x00")
    if el.vr in FIXED_WIDTH:
        return "\\".join(str(v) for v in decode_numeric(el))
    if el.vr in ("OB", "OW"):
        raise DecodeError(f"{el.tag}: binary VR {el.vr} has no string value")
    raise DecodeError(f"{el.tag}: cannot decode VR {el.vr}")


def _decode_charset(raw: bytes, el: DataElement, ascii_only: bool) -> str:
    if b"\x00" in raw.rstrip(b"\x00"):
        raise DecodeError(f"{el.tag}: embedded NUL in {el.vr} value")
    try:
        return raw.decode("ascii") if ascii_only else raw.decode("latin-1")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{el.tag}: invalid bytes for VR {el.vr}") from exc


def decode_numeric(el: DataElement):
    """Decode fixed-width binary VRs into a list of Python numbers."""
    width = FIXED_WIDTH.get(el.vr)
    if width is None:
        raise DecodeError(f"{el.tag}: VR {el.vr} is not fixed-width numeric")
    raw = el.raw
    if len(raw) % width:
        raise DecodeError(f"{el.tag}: length {len(raw)} not a multiple of {width}")
    fmt = {"US": "<H", "SS": "<h", "UL": "<I", "SL": "<i", "FL": "<f", "FD": "<d"}[el.vr]
    return [struct.unpack_from(fmt, raw, off)[0] for off in range(0, len(raw), width)]


def element_from_string(tag: Tag, value: str, vr: str | None = None) -> DataElement:
    """Convenience constructor using the dictionary VR when not given."""
    return DataElement(tag, vr or vr_of(tag), value.encode("latin-1"))
