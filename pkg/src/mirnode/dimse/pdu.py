"""PDU codec for the DIMSE upper layer.

Layout: 1 type byte, 1 reserved zero byte, 4-byte big-endian payload length,
payload. Variable items inside associate PDUs are 1 type byte, 1 reserved
byte, 2-byte big-endian length, payload.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import LengthMismatch, MalformedPayload, OversizePayload, UnknownPduType

APPLICATION_CONTEXT = "1.2.840.10008.3.1.1.1"

PDU_ASSOCIATE_RQ = 0x01
PDU_ASSOCIATE_AC = 0x02
PDU_ASSOCIATE_RJ = 0x03
PDU_P_DATA_TF = 0x04
PDU_RELEASE_RQ = 0x05
PDU_RELEASE_RP = 0x06
PDU_ABORT = 0x07

_ITEM_APPLICATION_CONTEXT = 0x10
_ITEM_PRESENTATION_CONTEXT_RQ = 0x20
_ITEM_PRESENTATION_CONTEXT_AC = 0x21
_ITEM_ABSTRACT_SYNTAX = 0x30
_ITEM_TRANSFER_SYNTAX = 0x40
_ITEM_USER_INFO = 0x50
_ITEM_MAX_LENGTH = 0x51
_ITEM_IMPLEMENTATION_UID = 0x52

# Maximum-length sub-item absent from user info: treat as this many bytes.
DEFAULT_MAX_PDU = 16384

CONTEXT_ACCEPTED = 0
CONTEXT_USER_REJECTED = 1
CONTEXT_ABSTRACT_UNSUPPORTED = 3
CONTEXT_TRANSFER_UNSUPPORTED = 4


def _check_ae(title: str) -> str:
    if not title or len(title) > 16 or not title.isascii():
        raise ValueError(f"AE title must be 1-16 ASCII characters, got {title!r}")
    if title != title.strip():
        raise ValueError(f"AE title must not carry surrounding spaces: {title!r}")
    return title


@dataclass(frozen=True)
class ProposedContext:
    id: int
    abstract_syntax: str
    transfer_syntaxes: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (1 <= self.id <= 255) or self.id % 2 == 0:
            raise ValueError(f"presentation context id must be odd in 1-255, got {self.id}")
        if not self.transfer_syntaxes:
            raise ValueError("context must propose at least one transfer syntax")


@dataclass(frozen=True)
class AcceptedContext:
    id: int
    result: int
    transfer_syntax: str  # empty when the context was not accepted

    def __post_init__(self) -> None:
        if not (1 <= self.id <= 255) or self.id % 2 == 0:
            raise ValueError(f"presentation context id must be odd in 1-255, got {self.id}")
        if self.result not in (0, 1, 2, 3, 4):
            raise ValueError(f"context result {self.result} out of range")


@dataclass(frozen=True)
class AssociateRq:
    called_ae: str
    calling_ae: str
    contexts: tuple[ProposedContext, ...]
    max_pdu_length: int
    implementation_class_uid: str
    application_context: str = APPLICATION_CONTEXT
    protocol_version: int = 1

    def __post_init__(self) -> None:
        _check_ae(self.called_ae)
        _check_ae(self.calling_ae)
        ids = [c.id for c in self.contexts]
        if len(set(ids)) != len(ids):
            raise ValueError("presentation context ids must be unique")


@dataclass(frozen=True)
class AssociateAc:
    called_ae: str
    calling_ae: str
    contexts: tuple[AcceptedContext, ...]
    max_pdu_length: int
    implementation_class_uid: str
    application_context: str = APPLICATION_CONTEXT
    protocol_version: int = 1

    def __post_init__(self) -> None:
        _check_ae(self.called_ae)
        _check_ae(self.calling_ae)
        ids = [c.id for c in self.contexts]
        if len(set(ids)) != len(ids):
            raise ValueError("presentation context ids must be unique")


@dataclass(frozen=True)
class AssociateRj:
    result: int
    source: int
    reason: int


@dataclass(frozen=True)
class Pdv:
    context_id: int
    is_command: bool
    is_last: bool
    data: bytes


@dataclass(frozen=True)
class PDataTf:
    pdvs: tuple[Pdv, ...]

    def __post_init__(self) -> None:
        if not self.pdvs:
            raise ValueError("P-DATA-TF requires at least one PDV")


@dataclass(frozen=True)
class ReleaseRq:
    pass


@dataclass(frozen=True)
class ReleaseRp:
    pass


@dataclass(frozen=True)
class Abort:
    source: int
    reason: int


Pdu = (
    AssociateRq | AssociateAc | AssociateRj | PDataTf | ReleaseRq | ReleaseRp | Abort
)


# -- encoding --------------------------------------------------------------


def encode_pdu(pdu: Pdu) -> bytes:
    if isinstance(pdu, AssociateRq):
        return _frame(PDU_ASSOCIATE_RQ, _associate_payload(pdu, is_rq=True))
    if isinstance(pdu, AssociateAc):
        return _frame(PDU_ASSOCIATE_AC, _associate_payload(pdu, is_rq=False))
    if isinstance(pdu, AssociateRj):
        return _frame(PDU_ASSOCIATE_RJ, bytes([0, pdu.result, pdu.source, pdu.reason]))
    if isinstance(pdu, PDataTf):
        out = bytearray()
        for pdv in pdu.pdvs:
            control = (1 if pdv.is_command else 0) | (2 if pdv.is_last else 0)
            out += struct.pack(">I", len(pdv.data) + 2)
            out += bytes([pdv.context_id, control])
            out += pdv.data
        return _frame(PDU_P_DATA_TF, bytes(out))
    if isinstance(pdu, ReleaseRq):
        return _frame(PDU_RELEASE_RQ, bytes(4))
    if isinstance(pdu, ReleaseRp):
        return _frame(PDU_RELEASE_RP, bytes(4))
    if isinstance(pdu, Abort):
        return _frame(PDU_ABORT, bytes([0, 0, pdu.source, pdu.reason]))
    raise TypeError(f"not a Pdu: {pdu!r}")


def _frame(pdu_type: int, payload: bytes) -> bytes:
    if len(payload) > 0xFFFFFFFF:
        raise OversizePayload(f"{len(payload)} bytes")
    return bytes([pdu_type, 0]) + struct.pack(">I", len(payload)) + payload


def _item(item_type: int, payload: bytes) -> bytes:
    if len(payload) > 0xFFFF:
        raise OversizePayload(f"item {item_type:#x}: {len(payload)} bytes")
    return bytes([item_type, 0]) + struct.pack(">H", len(payload)) + payload


def _associate_payload(pdu: AssociateRq | AssociateAc, is_rq: bool) -> bytes:
    out = bytearray()
    out += struct.pack(">H", pdu.protocol_version)
    out += b"\x00\x00"
    out += pdu.called_ae.ljust(16).encode("ascii")
    out += pdu.calling_ae.ljust(16).encode("ascii")
    out += bytes(32)
    out += _item(_ITEM_APPLICATION_CONTEXT, pdu.application_context.encode("ascii"))
    for ctx in pdu.contexts:
        if is_rq:
            body = bytes([ctx.id, 0, 0, 0])
            body += _item(_ITEM_ABSTRACT_SYNTAX, ctx.abstract_syntax.encode("ascii"))
            for ts in ctx.transfer_syntaxes:
                body += _item(_ITEM_TRANSFER_SYNTAX, ts.encode("ascii"))
            out += _item(_ITEM_PRESENTATION_CONTEXT_RQ, body)
        else:
            body = bytes([ctx.id, 0, ctx.result, 0])
            body += _item(_ITEM_TRANSFER_SYNTAX, ctx.transfer_syntax.encode("ascii"))
            out += _item(_ITEM_PRESENTATION_CONTEXT_AC, body)
    user = _item(_ITEM_MAX_LENGTH, struct.pack(">I", pdu.max_pdu_length))
    user += _item(_ITEM_IMPLEMENTATION_UID, pdu.implementation_class_uid.encode("ascii"))
    out += _item(_ITEM_USER_INFO, user)
    return bytes(out)


# -- decoding --------------------------------------------------------------


def decode_pdu(data: bytes) -> Pdu:
    """Decode exactly one PDU occupying the whole buffer."""
    if len(data) < 6:
        raise LengthMismatch(f"{len(data)} bytes is below the 6-byte PDU header")
    pdu_type = data[0]
    declared = struct.unpack(">I", data[2:6])[0]
    if len(data) - 6 != declared:
        raise LengthMismatch(f"declared {declared} payload bytes, have {len(data) - 6}")
    payload = data[6:]
    try:
        if pdu_type == PDU_ASSOCIATE_RQ:
            return _decode_associate(payload, is_rq=True)
        if pdu_type == PDU_ASSOCIATE_AC:
            return _decode_associate(payload, is_rq=False)
        if pdu_type == PDU_ASSOCIATE_RJ:
            _need(payload, 4)
            return AssociateRj(result=payload[1], source=payload[2], reason=payload[3])
        if pdu_type == PDU_P_DATA_TF:
            return _decode_p_data(payload)
        if pdu_type == PDU_RELEASE_RQ:
            _need(payload, 4)
            return ReleaseRq()
        if pdu_type == PDU_RELEASE_RP:
            _need(payload, 4)
            return ReleaseRp()
        if pdu_type == PDU_ABORT:
            _need(payload, 4)
            return Abort(source=payload[2], reason=payload[3])
    except ValueError as exc:
        raise MalformedPayload(str(exc)) from None
    raise UnknownPduType(f"PDU type {pdu_type:#04x}")


def _need(payload: bytes, n: int) -> None:
    if len(payload) != n:
        raise MalformedPayload(f"payload is {len(payload)} bytes, expected {n}")


def _decode_p_data(payload: bytes) -> PDataTf:
    pdvs: list[Pdv] = []
    pos = 0
    while pos < len(payload):
        if pos + 4 > len(payload):
            raise MalformedPayload("PDV length field truncated")
        length = struct.unpack(">I", payload[pos : pos + 4])[0]
        pos += 4
        if length < 2 or pos + length > len(payload):
            raise MalformedPayload(f"PDV length {length} exceeds payload")
        context_id = payload[pos]
        control = payload[pos + 1]
        data = payload[pos + 2 : pos + length]
        pdvs.append(Pdv(
            context_id=context_id,
            is_command=bool(control & 1),
            is_last=bool(control & 2),
            data=data,
        ))
        pos += length
    if not pdvs:
        raise MalformedPayload("P-DATA-TF with no PDVs")
    return PDataTf(tuple(pdvs))


class _Items:
    """Cursor over a run of variable items."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def __iter__(self):
        while self.pos < len(self.data):
            if self.pos + 4 > len(self.data):
                raise MalformedPayload("item header truncated")
            item_type = self.data[self.pos]
            length = struct.unpack(">H", self.data[self.pos + 2 : self.pos + 4])[0]
            start = self.pos + 4
            if start + length > len(self.data):
                raise MalformedPayload(f"item {item_type:#x} length {length} exceeds payload")
            self.pos = start + length
            yield item_type, self.data[start : start + length]


def _decode_associate(payload: bytes, is_rq: bool) -> AssociateRq | AssociateAc:
    if len(payload) < 68:
        raise MalformedPayload(f"associate payload is {len(payload)} bytes, needs >= 68")
    version = struct.unpack(">H", payload[0:2])[0]
    called = payload[4:20].decode("ascii", errors="replace").strip()
    calling = payload[20:36].decode("ascii", errors="replace").strip()
    app_context = ""
    contexts: list[ProposedContext | AcceptedContext] = []
    max_pdu = DEFAULT_MAX_PDU
    implementation_uid = ""
    for item_type, body in _Items(payload[68:]):
        if item_type == _ITEM_APPLICATION_CONTEXT:
            app_context = body.decode("ascii", errors="replace")
        elif item_type == _ITEM_PRESENTATION_CONTEXT_RQ and is_rq:
            contexts.append(_decode_context_rq(body))
        elif item_type == _ITEM_PRESENTATION_CONTEXT_AC and not is_rq:
            contexts.append(_decode_context_ac(body))
        elif item_type == _ITEM_USER_INFO:
            for sub_type, sub in _Items(body):
                if sub_type == _ITEM_MAX_LENGTH:
                    if len(sub) != 4:
                        raise MalformedPayload("maximum-length sub-item must be 4 bytes")
                    max_pdu = struct.unpack(">I", sub)[0]
                elif sub_type == _ITEM_IMPLEMENTATION_UID:
                    implementation_uid = sub.decode("ascii", errors="replace")
                # other user-info sub-items are legal; ignore them
        # unknown top-level items are ignored for interoperability
    cls = AssociateRq if is_rq else AssociateAc
    return cls(
        called_ae=called,
        calling_ae=calling,
        contexts=tuple(contexts),
        max_pdu_length=max_pdu,
        implementation_class_uid=implementation_uid,
        application_context=app_context,
        protocol_version=version,
    )


def _decode_context_rq(body: bytes) -> ProposedContext:
    if len(body) < 4:
        raise MalformedPayload("presentation context item too short")
    ctx_id = body[0]
    abstract = ""
    syntaxes: list[str] = []
    for sub_type, sub in _Items(body[4:]):
        if sub_type == _ITEM_ABSTRACT_SYNTAX:
            abstract = sub.decode("ascii", errors="replace")
        elif sub_type == _ITEM_TRANSFER_SYNTAX:
            syntaxes.append(sub.decode("ascii", errors="replace"))
    if not abstract or not syntaxes:
        raise MalformedPayload("presentation context lacks abstract/transfer syntax")
    return ProposedContext(id=ctx_id, abstract_syntax=abstract, transfer_syntaxes=tuple(syntaxes))


def _decode_context_ac(body: bytes) -> AcceptedContext:
    if len(body) < 4:
        raise MalformedPayload("presentation context item too short")
    ctx_id = body[0]
    result = body[2]
    transfer = ""
    for sub_type, sub in _Items(body[4:]):
        if sub_type == _ITEM_TRANSFER_SYNTAX:
            transfer = sub.decode("ascii", errors="replace")
    return AcceptedContext(id=ctx_id, result=result, transfer_syntax=transfer)
