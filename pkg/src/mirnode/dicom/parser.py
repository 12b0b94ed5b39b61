"""Strict DICOM Part-10 and raw-dataset parsing.

Accepts Implicit and Explicit VR Little Endian only. No element-skipping
recovery: any structural problem raises, nothing is silently dropped.
"""
from __future__ import annotations

import struct

from .dataset import (
    DataElement,
    DicomDataset,
    FileMeta,
    IMPLEMENTATION_CLASS_UID,
    IMPLICIT_VR_LE,
    LONG_FORM_VRS,
    SUPPORTED_TRANSFER_SYNTAXES,
    SUPPORTED_VRS,
)
from .errors import (
    DepthExceeded,
    InvalidVr,
    MalformedElement,
    NotDicom,
    Truncated,
    UnsupportedTransferSyntax,
)
from .tags import (
    ITEM,
    ITEM_DELIMITER,
    MEDIA_SOP_CLASS_UID,
    MEDIA_SOP_INSTANCE_UID,
    IMPLEMENTATION_CLASS_UID_TAG,
    SEQUENCE_DELIMITER,
    Tag,
    TRANSFER_SYNTAX_UID,
    vr_of,
)

PREAMBLE_SIZE = 128
MAGIC = b"DICM"
UNDEFINED_LENGTH = 0xFFFFFFFF
MAX_SQ_DEPTH = 8


class _Reader:
    """Bounded cursor over a byte region."""

    def __init__(self, data: bytes, pos: int, end: int):
        self.data = data
        self.pos = pos
        self.end = end

    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise Truncated(f"needed {n} bytes at offset {self.pos}, have {self.remaining()}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def peek_tag(self) -> Tag:
        if self.pos + 4 > self.end:
            raise Truncated(f"needed tag at offset {self.pos}")
        g, e = struct.unpack_from("<HH", self.data, self.pos)
        return Tag(g, e)

    def tag(self) -> Tag:
        g, e = struct.unpack("<HH", self.take(4))
        return Tag(g, e)


def parse_part10(data: bytes) -> tuple[FileMeta, DicomDataset]:
    """Parse a complete Part-10 file image into (file meta, main dataset)."""
    meta, ds, _ = parse_part10_ex(data)
    return meta, ds


def parse_part10_ex(data: bytes) -> tuple[FileMeta, DicomDataset, int]:
    """As parse_part10, additionally returning the body byte offset."""
    if len(data) < PREAMBLE_SIZE + len(MAGIC):
        raise Truncated(f"{len(data)} bytes is below the 132-byte preamble+marker minimum")
    if data[PREAMBLE_SIZE : PREAMBLE_SIZE + 4] != MAGIC:
        raise NotDicom("no 'DICM' marker at offset 128")
    meta, body_offset = _parse_file_meta(data, PREAMBLE_SIZE + 4)
    if meta.transfer_syntax_uid not in SUPPORTED_TRANSFER_SYNTAXES:
        raise UnsupportedTransferSyntax(meta.transfer_syntax_uid or "<missing>")
    explicit = meta.transfer_syntax_uid != IMPLICIT_VR_LE
    reader = _Reader(data, body_offset, len(data))
    ds = _parse_dataset(reader, explicit=explicit, depth=0)
    return meta, ds, body_offset


def parse_dataset(data: bytes, transfer_syntax_uid: str) -> DicomDataset:
    """Parse a bare dataset (no preamble/meta), e.g. a DIMSE data set."""
    if transfer_syntax_uid not in SUPPORTED_TRANSFER_SYNTAXES:
        raise UnsupportedTransferSyntax(transfer_syntax_uid)
    reader = _Reader(data, 0, len(data))
    return _parse_dataset(reader, explicit=transfer_syntax_uid != IMPLICIT_VR_LE, depth=0)


def _parse_file_meta(data: bytes, pos: int) -> tuple[FileMeta, int]:
    reader = _Reader(data, pos, len(data))
    tag, vr, length = _read_header_explicit(reader)
    if tag != Tag(0x0002, 0x0000) or vr != "UL" or length != 4:
        raise MalformedElement("file meta must begin with (0002,0000) UL group length")
    group_len = reader.u32()
    if reader.pos + group_len > len(data):
        raise Truncated("file meta group length exceeds input")
    meta_reader = _Reader(data, reader.pos, reader.pos + group_len)
    fields = {
        "transfer_syntax_uid": "",
        "media_sop_class_uid": "",
        "media_sop_instance_uid": "",
        "implementation_class_uid": IMPLEMENTATION_CLASS_UID,
    }
    while meta_reader.remaining():
        tag, vr, length = _read_header_explicit(meta_reader)
        if tag.group != 0x0002:
            raise MalformedElement(f"non-meta tag {tag} inside file meta group")
        if length == UNDEFINED_LENGTH:
            raise MalformedElement(f"undefined length in file meta element {tag}")
        raw = meta_reader.take(length)
        if tag == TRANSFER_SYNTAX_UID:
            fields["transfer_syntax_uid"] = _uid(raw)
        elif tag == MEDIA_SOP_CLASS_UID:
            fields["media_sop_class_uid"] = _uid(raw)
        elif tag == MEDIA_SOP_INSTANCE_UID:
            fields["media_sop_instance_uid"] = _uid(raw)
        elif tag == IMPLEMENTATION_CLASS_UID_TAG:
            fields["implementation_class_uid"] = _uid(raw)
    return FileMeta(**fields), meta_reader.end


def _uid(raw: bytes) -> str:
    return raw.decode("ascii", errors="replace").rstrip("\x00 ")


def _read_header_explicit(reader: _Reader) -> tuple[Tag, str, int]:
    tag = reader.tag()
    vr_bytes = reader.take(2)
    try:
        vr = vr_bytes.decode("ascii")
    except UnicodeDecodeError:
        raise InvalidVr(f"{tag}: VR bytes {vr_bytes!r}") from None
    if vr not in SUPPORTED_VRS:
        raise InvalidVr(f"{tag}: VR {vr!r} not supported")
    if vr in LONG_FORM_VRS:
        reader.take(2)  # reserved
        length = reader.u32()
    else:
        length = reader.u16()
    return tag, vr, length


def _parse_dataset(
    reader: _Reader,
    explicit: bool,
    depth: int,
    stop_at_item_delimiter: bool = False,
) -> DicomDataset:
    ds = DicomDataset()
    while reader.remaining():
        tag = reader.peek_tag()
        if stop_at_item_delimiter and tag == ITEM_DELIMITER:
            reader.tag()
            length = reader.u32()
            if length != 0:
                raise MalformedElement("item delimiter with nonzero length")
            break
        el = _parse_element(reader, explicit, depth)
        if el.tag in ds:
            raise MalformedElement(f"duplicate tag {el.tag}")
        ds.put(el)
    return ds


def _parse_element(reader: _Reader, explicit: bool, depth: int) -> DataElement:
    if explicit:
        tag, vr, length = _read_header_explicit(reader)
    else:
        tag = reader.tag()
        length = reader.u32()
        vr = vr_of(tag)
        if length == UNDEFINED_LENGTH and vr != "SQ":
            # Implicit undefined length implies a sequence regardless of dictionary.
            vr = "SQ"
    if tag.group == 0xFFFE:
        raise MalformedElement(f"sequence framing tag {tag} outside a sequence")
    if tag.is_file_meta:
        raise MalformedElement(f"file meta tag {tag} in main dataset")
    if vr == "SQ" or (vr == "UN" and length == UNDEFINED_LENGTH):
        if depth + 1 > MAX_SQ_DEPTH:
            raise DepthExceeded(f"{tag}: sequence nesting beyond {MAX_SQ_DEPTH}")
        items = _parse_sequence(reader, explicit and vr == "SQ", length, depth + 1)
        return DataElement(tag, "SQ", items)
    if length == UNDEFINED_LENGTH:
        raise MalformedElement(f"{tag}: undefined length on non-sequence VR {vr}")
    return DataElement(tag, vr, reader.take(length))


def _parse_sequence(reader: _Reader, explicit: bool, length: int, depth: int) -> list[DicomDataset]:
    items: list[DicomDataset] = []
    if length == UNDEFINED_LENGTH:
        while True:
            tag = reader.tag()
            item_len = reader.u32()
            if tag == SEQUENCE_DELIMITER:
                if item_len != 0:
                    raise MalformedElement("sequence delimiter with nonzero length")
                return items
            items.append(_parse_item(reader, explicit, tag, item_len, depth))
    end = reader.pos + length
    if end > reader.end:
        raise Truncated("sequence length exceeds enclosing region")
    sub = _Reader(reader.data, reader.pos, end)
    while sub.remaining():
        tag = sub.tag()
        item_len = sub.u32()
        items.append(_parse_item(sub, explicit, tag, item_len, depth))
    reader.pos = end
    return items


def _parse_item(reader: _Reader, explicit: bool, tag: Tag, item_len: int, depth: int) -> DicomDataset:
    if tag != ITEM:
        raise MalformedElement(f"expected item tag inside sequence, found {tag}")
    if item_len == UNDEFINED_LENGTH:
        return _parse_dataset(reader, explicit, depth, stop_at_item_delimiter=True)
    end = reader.pos + item_len
    if end > reader.end:
        raise Truncated("item length exceeds enclosing region")
    sub = _Reader(reader.data, reader.pos, end)
    ds = _parse_dataset(sub, explicit, depth)
    reader.pos = end
    return ds
