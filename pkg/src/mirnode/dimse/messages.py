"""DIMSE command sets: C-ECHO and C-STORE requests and responses.

Command sets are always encoded Implicit VR Little Endian and open with a
CommandGroupLength element covering the rest of the group.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from ..dicom import DicomDataset, IMPLICIT_VR_LE, parse_dataset, serialize_dataset
from ..dicom import tags
from ..dicom.errors import DicomError
from .errors import MalformedPayload

C_STORE_RQ = 0x0001
C_STORE_RSP = 0x8001
C_ECHO_RQ = 0x0030
C_ECHO_RSP = 0x8030

STATUS_SUCCESS = 0x0000
STATUS_OUT_OF_RESOURCES = 0xA700

PRIORITY_MEDIUM = 0x0000

# CommandDataSetType: 0x0101 means no data set follows the command set.
NO_DATASET = 0x0101
HAS_DATASET = 0x0000


@dataclass(frozen=True)
class DimseCommand:
    """Decoded command set. message_id carries MessageID for requests and
    MessageIDBeingRespondedTo for responses."""

    command_field: int
    message_id: int
    affected_sop_class: str
    affected_sop_instance: str
    status: int | None
    has_dataset: bool

    @property
    def is_request(self) -> bool:
        return self.command_field in (C_ECHO_RQ, C_STORE_RQ)


def echo_rq(message_id: int, sop_class: str) -> bytes:
    return _encode({
        tags.AFFECTED_SOP_CLASS: sop_class,
        tags.COMMAND_FIELD: C_ECHO_RQ,
        tags.MESSAGE_ID: message_id,
        tags.COMMAND_DATA_SET_TYPE: NO_DATASET,
    })


def echo_rsp(message_id: int, sop_class: str, status: int = STATUS_SUCCESS) -> bytes:
    return _encode({
        tags.AFFECTED_SOP_CLASS: sop_class,
        tags.COMMAND_FIELD: C_ECHO_RSP,
        tags.MESSAGE_ID_RESPONDED: message_id,
        tags.COMMAND_DATA_SET_TYPE: NO_DATASET,
        tags.STATUS: status,
    })


def store_rq(message_id: int, sop_class: str, sop_instance: str,
             priority: int = PRIORITY_MEDIUM) -> bytes:
    return _encode({
        tags.AFFECTED_SOP_CLASS: sop_class,
        tags.COMMAND_FIELD: C_STORE_RQ,
        tags.MESSAGE_ID: message_id,
        tags.PRIORITY: priority,
        tags.COMMAND_DATA_SET_TYPE: HAS_DATASET,
        tags.AFFECTED_SOP_INSTANCE: sop_instance,
    })


def store_rsp(message_id: int, sop_class: str, sop_instance: str,
              status: int) -> bytes:
    return _encode({
        tags.AFFECTED_SOP_CLASS: sop_class,
        tags.COMMAND_FIELD: C_STORE_RSP,
        tags.MESSAGE_ID_RESPONDED: message_id,
        tags.COMMAND_DATA_SET_TYPE: NO_DATASET,
        tags.STATUS: status,
        tags.AFFECTED_SOP_INSTANCE: sop_instance,
    })


def _encode(fields: dict) -> bytes:
    ds = DicomDataset()
    for tag, value in fields.items():
        if isinstance(value, int):
            ds.put_int(tag, "US", value)
        else:
            ds.put_string(tag, "UI", value)
    body = serialize_dataset(ds, IMPLICIT_VR_LE)
    head = struct.pack("<HHI", 0, 0, 4) + struct.pack("<I", len(body))
    return head + body


def parse_command(data: bytes) -> DimseCommand:
    """Decode a reassembled command set; enforces the group-length element."""
    try:
        ds = parse_dataset(data, IMPLICIT_VR_LE)
    except DicomError as exc:
        raise MalformedPayload(f"undecodable command set: {exc}") from None
    group_len = ds.get_int(tags.COMMAND_GROUP_LENGTH)
    if group_len is None:
        raise MalformedPayload("command set lacks CommandGroupLength")
    if group_len != len(data) - 12:
        raise MalformedPayload(
            f"CommandGroupLength {group_len} != {len(data) - 12} actual")
    field = ds.get_int(tags.COMMAND_FIELD)
    if field not in (C_ECHO_RQ, C_ECHO_RSP, C_STORE_RQ, C_STORE_RSP):
        raise MalformedPayload(f"unsupported command field {field!r}")
    if field in (C_ECHO_RQ, C_STORE_RQ):
        message_id = ds.get_int(tags.MESSAGE_ID)
    else:
        message_id = ds.get_int(tags.MESSAGE_ID_RESPONDED)
    if message_id is None:
        raise MalformedPayload("command set lacks a message id")
    dataset_type = ds.get_int(tags.COMMAND_DATA_SET_TYPE)
    if dataset_type is None:
        raise MalformedPayload("command set lacks CommandDataSetType")
    return DimseCommand(
        command_field=field,
        message_id=message_id,
        affected_sop_class=ds.get_string(tags.AFFECTED_SOP_CLASS) or "",
        affected_sop_instance=ds.get_string(tags.AFFECTED_SOP_INSTANCE) or "",
        status=ds.get_int(tags.STATUS),
        has_dataset=dataset_type != NO_DATASET,
    )
