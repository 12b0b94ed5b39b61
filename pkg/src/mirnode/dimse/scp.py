"""Inbound DIMSE: the association state machine and C-ECHO/C-STORE SCP."""
from __future__ import annotations

import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import Callable

from ..dicom import FileMeta, assemble_part10
from .association import AssociationConfig, accept_association
from .errors import DimseError, PeerAborted
from .messages import (
    C_ECHO_RQ,
    C_STORE_RQ,
    STATUS_OUT_OF_RESOURCES,
    STATUS_SUCCESS,
    echo_rsp,
    parse_command,
    store_rsp,
)
from .pdu import (
    Abort,
    AssociateRj,
    AssociateRq,
    CONTEXT_ACCEPTED,
    DEFAULT_MAX_PDU,
    PDataTf,
    ReleaseRp,
    ReleaseRq,
)
from .stream import read_pdu, send_message, send_pdu

# A sink ingests (sop_instance_uid, part10_file_bytes); raising marks the
# store as failed without tearing down the association.
InstanceSink = Callable[[str, bytes], None]


@dataclass
class AssociationSummary:
    calling_ae: str = ""
    called_ae: str = ""
    echoes: int = 0
    stores: int = 0
    store_failures: int = 0
    outcome: str = "aborted"  # one of: released, aborted, rejected
    violation: str | None = None


def scp_serve(conn: socket.socket, cfg: AssociationConfig,
              sink: InstanceSink) -> AssociationSummary:
    summary = AssociationSummary()
    try:
        _serve(conn, cfg, sink, summary)
    except PeerAborted as exc:
        summary.outcome = "aborted"
        if summary.violation is None:
            summary.violation = f"PeerAborted: {exc}"
    finally:
        try:
            conn.close()
        except OSError:
            pass
    return summary


def _abort(conn: socket.socket, summary: AssociationSummary, note: str) -> None:
    summary.outcome = "aborted"
    summary.violation = note
    try:
        send_pdu(conn, Abort(source=2, reason=0))
    except OSError:
        pass


def _serve(conn: socket.socket, cfg: AssociationConfig, sink: InstanceSink,
           summary: AssociationSummary) -> None:
    try:
        pdu = read_pdu(conn, cfg.assoc_timeout)
    except socket.timeout:
        _abort(conn, summary, "IdleTimeout: no association request")
        return
    except DimseError as exc:
        _abort(conn, summary, f"ProtocolViolation: {exc}")
        return
    if not isinstance(pdu, AssociateRq):
        _abort(conn, summary, f"ProtocolViolation: {type(pdu).__name__} before association")
        return
    summary.calling_ae = pdu.calling_ae
    summary.called_ae = pdu.called_ae
    response = accept_association(pdu, cfg)
    send_pdu(conn, response)
    if isinstance(response, AssociateRj):
        summary.outcome = "rejected"
        return
    accepted = {c.id: c.transfer_syntax for c in response.contexts
                if c.result == CONTEXT_ACCEPTED}
    out_limit = pdu.max_pdu_length or DEFAULT_MAX_PDU

    command_buf: dict[int, bytearray] = {}
    data_buf: dict[int, tuple] = {}  # ctx id -> (store command, bytearray)

    while True:
        try:
            pdu = read_pdu(conn, cfg.idle_timeout)
        except socket.timeout:
            _abort(conn, summary, "IdleTimeout: established association went quiet")
            return
        except DimseError as exc:
            if isinstance(exc, PeerAborted):
                raise
            _abort(conn, summary, f"ProtocolViolation: {exc}")
            return
        if isinstance(pdu, ReleaseRq):
            send_pdu(conn, ReleaseRp())
            summary.outcome = "released"
            return
        if isinstance(pdu, Abort):
            summary.outcome = "aborted"
            return
        if not isinstance(pdu, PDataTf):
            _abort(conn, summary, f"ProtocolViolation: {type(pdu).__name__} while established")
            return
        for pdv in pdu.pdvs:
            note = _handle_pdv(conn, pdv, accepted, out_limit, sink, summary,
                               command_buf, data_buf)
            if note is not None:
                _abort(conn, summary, note)
                return


def _handle_pdv(conn, pdv, accepted, out_limit, sink, summary,
                command_buf, data_buf) -> str | None:
    """Returns a violation note, or None when the PDV was consumed cleanly."""
    if pdv.context_id not in accepted:
        return f"ProtocolViolation: PDV on unaccepted context {pdv.context_id}"
    ctx = pdv.context_id
    if pdv.is_command:
        if ctx in data_buf:
            return "ProtocolViolation: command fragment while awaiting data set"
        buf = command_buf.setdefault(ctx, bytearray())
        buf += pdv.data
        if not pdv.is_last:
            return None
        del command_buf[ctx]
        try:
            cmd = parse_command(bytes(buf))
        except DimseError as exc:
            return f"ProtocolViolation: {exc}"
        if cmd.command_field == C_ECHO_RQ:
            send_message(conn, ctx, echo_rsp(cmd.message_id, cmd.affected_sop_class),
                         is_command=True, max_pdu=out_limit)
            summary.echoes += 1
            return None
        if cmd.command_field == C_STORE_RQ:
            if not cmd.has_dataset:
                return "ProtocolViolation: C-STORE-RQ without a data set"
            data_buf[ctx] = (cmd, bytearray())
            return None
        return f"ProtocolViolation: unexpected command field {cmd.command_field:#06x}"
    if ctx not in data_buf:
        return "ProtocolViolation: data fragment with no pending C-STORE"
    cmd, buf = data_buf[ctx]
    buf += pdv.data
    if not pdv.is_last:
        return None
    del data_buf[ctx]
    meta = FileMeta(
        transfer_syntax_uid=accepted[ctx],
        media_sop_class_uid=cmd.affected_sop_class,
        media_sop_instance_uid=cmd.affected_sop_instance,
    )
    file_bytes = assemble_part10(meta, bytes(buf))
    try:
        sink(cmd.affected_sop_instance, file_bytes)
        status = STATUS_SUCCESS
        summary.stores += 1
    except Exception:
        status = STATUS_OUT_OF_RESOURCES
        summary.store_failures += 1
    send_message(
        conn, ctx,
        store_rsp(cmd.message_id, cmd.affected_sop_class,
                  cmd.affected_sop_instance, status),
        is_command=True, max_pdu=out_limit,
    )
    return None


class DimseServer:
    """TCP listener running one SCP state machine per connection."""

    def __init__(self, host: str, port: int, cfg: AssociationConfig,
                 sink: InstanceSink):
        self.cfg = cfg
        self.sink = sink
        self.summaries: list[AssociationSummary] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self) -> None:
                summary = scp_serve(self.request, outer.cfg, outer.sink)
                with outer._lock:
                    outer.summaries.append(summary)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            daemon=True, name="dimse-scp")
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
