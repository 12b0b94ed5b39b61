"""Outbound DIMSE: association driver and the C-ECHO/C-STORE SCU."""
from __future__ import annotations

import socket

from ..dicom import VERIFICATION_SOP_CLASS, parse_part10_ex, tags
from .association import AssociationConfig
from .errors import (
    AssociationRejected,
    ConnectFailed,
    NoAcceptedContext,
    PeerAborted,
    ProtocolViolation,
)
from .messages import (
    C_ECHO_RSP,
    C_STORE_RSP,
    DimseCommand,
    echo_rq,
    parse_command,
    store_rq,
)
from .pdu import (
    Abort,
    AssociateAc,
    AssociateRj,
    AssociateRq,
    CONTEXT_ACCEPTED,
    DEFAULT_MAX_PDU,
    PDataTf,
    ProposedContext,
    ReleaseRp,
    ReleaseRq,
)
from ..dicom import IMPLEMENTATION_CLASS_UID
from .stream import read_pdu, send_message, send_pdu


class ScuAssociation:
    """One negotiated association; issues echoes and stores sequentially.

    cfg.called_ae names the remote peer; cfg.calling_ae is this node.
    """

    def __init__(self, conn: socket.socket, cfg: AssociationConfig,
                 contexts: dict[tuple[str, str], int], peer_max_pdu: int):
        self._conn = conn
        self._cfg = cfg
        self._contexts = contexts
        self._peer_max_pdu = peer_max_pdu
        self._next_message_id = 1

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def connect(cls, host: str, port: int, cfg: AssociationConfig,
                proposals: list[tuple[str, tuple[str, ...]]]) -> "ScuAssociation":
        if len(proposals) > 127:
            raise ValueError("at most 127 presentation contexts per association")
        contexts = tuple(
            ProposedContext(id=1 + 2 * i, abstract_syntax=abstract,
                            transfer_syntaxes=syntaxes)
            for i, (abstract, syntaxes) in enumerate(proposals)
        )
        rq = AssociateRq(
            called_ae=cfg.called_ae,
            calling_ae=cfg.calling_ae,
            contexts=contexts,
            max_pdu_length=cfg.max_pdu_length,
            implementation_class_uid=IMPLEMENTATION_CLASS_UID,
        )
        try:
            conn = socket.create_connection((host, port), timeout=cfg.assoc_timeout)
        except OSError as exc:
            raise ConnectFailed(f"{host}:{port}: {exc}") from None
        try:
            send_pdu(conn, rq)
            answer = read_pdu(conn, cfg.assoc_timeout)
        except (OSError, socket.timeout) as exc:
            conn.close()
            raise ConnectFailed(f"{host}:{port}: {exc}") from None
        if isinstance(answer, AssociateRj):
            conn.close()
            raise AssociationRejected(answer.result, answer.source, answer.reason)
        if isinstance(answer, Abort):
            conn.close()
            raise PeerAborted(f"abort during negotiation (reason {answer.reason})")
        if not isinstance(answer, AssociateAc):
            conn.close()
            raise ProtocolViolation(f"{type(answer).__name__} in reply to associate request")
        accepted: dict[tuple[str, str], int] = {}
        by_id = {ctx.id: ctx for ctx in contexts}
        for ac_ctx in answer.contexts:
            proposed = by_id.get(ac_ctx.id)
            if proposed is None or ac_ctx.result != CONTEXT_ACCEPTED:
                continue
            key = (proposed.abstract_syntax, ac_ctx.transfer_syntax)
            accepted.setdefault(key, ac_ctx.id)
        return cls(conn, cfg, accepted, answer.max_pdu_length or DEFAULT_MAX_PDU)

    def release(self) -> None:
        send_pdu(self._conn, ReleaseRq())
        try:
            answer = read_pdu(self._conn, self._cfg.assoc_timeout)
        finally:
            self._conn.close()
        if not isinstance(answer, ReleaseRp):
            raise ProtocolViolation(f"{type(answer).__name__} in reply to release request")

    def abort(self) -> None:
        try:
            send_pdu(self._conn, Abort(source=0, reason=0))
        finally:
            self._conn.close()

    def close(self) -> None:
        self._conn.close()

    # -- services ----------------------------------------------------------

    def echo(self) -> int:
        ctx_id = self._context_for(VERIFICATION_SOP_CLASS)
        message_id = self._take_message_id()
        send_message(self._conn, ctx_id, echo_rq(message_id, VERIFICATION_SOP_CLASS),
                     is_command=True, max_pdu=self._peer_max_pdu)
        cmd = self._read_response()
        if cmd.command_field != C_ECHO_RSP or cmd.message_id != message_id:
            raise ProtocolViolation(
                f"expected C-ECHO-RSP to message {message_id}, got "
                f"{cmd.command_field:#06x}/{cmd.message_id}")
        return cmd.status if cmd.status is not None else -1

    def store(self, file_bytes: bytes) -> int:
        meta, ds, body_offset = parse_part10_ex(file_bytes)
        sop_class = ds.get_string(tags.SOP_CLASS_UID) or meta.media_sop_class_uid
        sop_instance = ds.get_string(tags.SOP_INSTANCE_UID) or meta.media_sop_instance_uid
        ctx_id = self._context_for(sop_class, meta.transfer_syntax_uid)
        message_id = self._take_message_id()
        send_message(self._conn, ctx_id,
                     store_rq(message_id, sop_class, sop_instance),
                     is_command=True, max_pdu=self._peer_max_pdu)
        send_message(self._conn, ctx_id, file_bytes[body_offset:],
                     is_command=False, max_pdu=self._peer_max_pdu)
        cmd = self._read_response()
        if cmd.command_field != C_STORE_RSP or cmd.message_id != message_id:
            raise ProtocolViolation(
                f"expected C-STORE-RSP to message {message_id}, got "
                f"{cmd.command_field:#06x}/{cmd.message_id}")
        return cmd.status if cmd.status is not None else -1

    # -- internals ----------------------------------------------------------

    def _take_message_id(self) -> int:
        mid = self._next_message_id
        self._next_message_id = (self._next_message_id % 0xFFFF) + 1
        return mid

    def _context_for(self, abstract: str, transfer: str | None = None) -> int:
        for (a, ts), ctx_id in self._contexts.items():
            if a == abstract and (transfer is None or ts == transfer):
                return ctx_id
        raise NoAcceptedContext(f"{abstract} ({transfer or 'any syntax'})")

    def _read_response(self) -> DimseCommand:
        buf = bytearray()
        while True:
            pdu = read_pdu(self._conn, self._cfg.idle_timeout)
            if isinstance(pdu, Abort):
                self._conn.close()
                raise PeerAborted(f"abort while awaiting response (reason {pdu.reason})")
            if not isinstance(pdu, PDataTf):
                raise ProtocolViolation(f"{type(pdu).__name__} while awaiting response")
            for pdv in pdu.pdvs:
                if not pdv.is_command:
                    raise ProtocolViolation("data fragment while awaiting a response command")
                buf += pdv.data
                if pdv.is_last:
                    return parse_command(bytes(buf))


def scu_echo(host: str, port: int, cfg: AssociationConfig, count: int = 1) -> list[int]:
    """Open an association, run `count` echoes, release."""
    assoc = ScuAssociation.connect(
        host, port, cfg, [(VERIFICATION_SOP_CLASS, _syntaxes(cfg))])
    try:
        return [assoc.echo() for _ in range(count)]
    finally:
        assoc.release()


def scu_send(host: str, port: int, cfg: AssociationConfig,
             files: list[bytes]) -> list[int]:
    """Store files over one association; returns one status per file."""
    parsed = [parse_part10_ex(f) for f in files]
    proposals: list[tuple[str, tuple[str, ...]]] = [
        (VERIFICATION_SOP_CLASS, _syntaxes(cfg))]
    seen = set()
    for (meta, ds, _), _file in zip(parsed, files):
        sop_class = ds.get_string(tags.SOP_CLASS_UID) or meta.media_sop_class_uid
        key = (sop_class, meta.transfer_syntax_uid)
        if key not in seen:
            seen.add(key)
            proposals.append((sop_class, (meta.transfer_syntax_uid,)))
    assoc = ScuAssociation.connect(host, port, cfg, proposals)
    try:
        return [assoc.store(f) for f in files]
    finally:
        assoc.release()


def _syntaxes(cfg: AssociationConfig) -> tuple[str, ...]:
    return tuple(sorted(cfg.supported_transfer_syntaxes))
