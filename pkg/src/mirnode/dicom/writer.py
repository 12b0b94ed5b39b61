"""Canonical DICOM serialization: ascending tags, even defined lengths."""
from __future__ import annotations

import struct

from .dataset import (
    DataElement,
    DicomDataset,
    FileMeta,
    FIXED_WIDTH,
    IMPLICIT_VR_LE,
    LONG_FORM_VRS,
    SPACE_PADDED_VRS,
    SUPPORTED_TRANSFER_SYNTAXES,
)
from .errors import OddLengthValue, UnsupportedTransferSyntax, ValueTooLong
from .tags import (
    FILE_META_GROUP_LENGTH,
    FILE_META_VERSION,
    IMPLEMENTATION_CLASS_UID_TAG,
    ITEM,
    MEDIA_SOP_CLASS_UID,
    MEDIA_SOP_INSTANCE_UID,
    Tag,
    TRANSFER_SYNTAX_UID,
)
from .parser import MAGIC, PREAMBLE_SIZE


def serialize_part10(meta: FileMeta, ds: DicomDataset) -> bytes:
    """Emit preamble + 'DICM' + meta group (Explicit VR LE) + body."""
    if meta.transfer_syntax_uid not in SUPPORTED_TRANSFER_SYNTAXES:
        raise UnsupportedTransferSyntax(meta.transfer_syntax_uid)
    out = bytearray(PREAMBLE_SIZE)
    out += MAGIC
    out += _file_meta_bytes(meta)
    out += serialize_dataset(ds, meta.transfer_syntax_uid)
    return bytes(out)


def assemble_part10(meta: FileMeta, body: bytes) -> bytes:
    """Part-10 file around an already-encoded body (e.g. received over DIMSE)."""
    if meta.transfer_syntax_uid not in SUPPORTED_TRANSFER_SYNTAXES:
        raise UnsupportedTransferSyntax(meta.transfer_syntax_uid)
    return bytes(PREAMBLE_SIZE) + MAGIC + _file_meta_bytes(meta) + body


def serialize_dataset(ds: DicomDataset, transfer_syntax_uid: str) -> bytes:
    """Body-only encoding in the given transfer syntax, tags ascending."""
    if transfer_syntax_uid not in SUPPORTED_TRANSFER_SYNTAXES:
        raise UnsupportedTransferSyntax(transfer_syntax_uid)
    explicit = transfer_syntax_uid != IMPLICIT_VR_LE
    out = bytearray()
    for el in ds.elements():
        _write_element(out, el, explicit)
    return bytes(out)


def _file_meta_bytes(meta: FileMeta) -> bytes:
    group = bytearray()
    for el in (
        DataElement(FILE_META_VERSION, "OB", b"\x00\x01"),
        _uid_el(MEDIA_SOP_CLASS_UID, meta.media_sop_class_uid),
        _uid_el(MEDIA_SOP_INSTANCE_UID, meta.media_sop_instance_uid),
        _uid_el(TRANSFER_SYNTAX_UID, meta.transfer_syntax_uid),
        _uid_el(IMPLEMENTATION_CLASS_UID_TAG, meta.implementation_class_uid),
    ):
        _write_element(group, el, True)
    out = bytearray()
    _write_element(out, DataElement(FILE_META_GROUP_LENGTH, "UL", struct.pack("<I", len(group))), True)
    out += group
    return bytes(out)


def _uid_el(tag: Tag, uid: str | None) -> DataElement:
    return DataElement(tag, "UI", (uid or "").encode("ascii"))


def _padded_value(el: DataElement) -> bytes:
    raw = el.raw
    if len(raw) % 2 == 0:
        return raw
    if el.vr == "UI":
        return raw + b"\x00"
    if el.vr in SPACE_PADDED_VRS:
        return raw + b" "
    if el.vr in ("OB", "UN"):
        return raw + b"\x00"
    # OW and fixed-width numerics cannot be padded without corrupting samples.
    raise OddLengthValue(f"{el.tag}: VR {el.vr} value length {len(raw)} is odd")


def _write_element(out: bytearray, el: DataElement, explicit: bool) -> None:
    if el.vr == "SQ":
        payload = bytearray()
        for item in el.items:
            item_bytes = bytearray()
            for sub in item.elements():
                _write_element(item_bytes, sub, explicit)
            payload += struct.pack("<HHI", ITEM.group, ITEM.element, len(item_bytes))
            payload += item_bytes
        value = bytes(payload)
    else:
        value = _padded_value(el)
        width = FIXED_WIDTH.get(el.vr)
        if width and len(value) % width:
            raise OddLengthValue(f"{el.tag}: VR {el.vr} length {len(value)} not multiple of {width}")
    if len(value) > 0xFFFFFFFE:
        raise ValueTooLong(f"{el.tag}: value of {len(value)} bytes")
    out += struct.pack("<HH", el.tag.group, el.tag.element)
    if explicit:
        out += el.vr.encode("ascii")
        if el.vr in LONG_FORM_VRS:
            out += struct.pack("<HI", 0, len(value))
        else:
            if len(value) > 0xFFFF:
                raise ValueTooLong(f"{el.tag}: {len(value)} bytes exceeds short-form length")
            out += struct.pack("<H", len(value))
    else:
        out += struct.pack("<I", len(value))
    out += value
