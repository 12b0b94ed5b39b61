"""Socket-level PDU framing shared by SCP and SCU."""
from __future__ import annotations

import socket
import struct

from .errors import PeerAborted, ProtocolViolation
from .pdu import Pdu, PDataTf, Pdv, decode_pdu, encode_pdu

# Upper bound on any single inbound PDU regardless of negotiation; a peer
# declaring more is out of protocol.
HARD_PDU_CAP = 32 * 1024 * 1024


def recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise PeerAborted("connection closed mid-PDU")
        buf += chunk
    return bytes(buf)


def read_pdu(conn: socket.socket, timeout: float | None) -> Pdu:
    """Read exactly one PDU. socket.timeout propagates to the caller."""
    conn.settimeout(timeout)
    header = recv_exact(conn, 6)
    length = struct.unpack(">I", header[2:6])[0]
    if length > HARD_PDU_CAP:
        raise ProtocolViolation(f"declared PDU length {length} exceeds cap")
    return decode_pdu(header + recv_exact(conn, length))


def send_pdu(conn: socket.socket, pdu: Pdu) -> None:
    conn.sendall(encode_pdu(pdu))


def send_message(conn: socket.socket, context_id: int, data: bytes,
                 is_command: bool, max_pdu: int) -> None:
    """Send one command set or data set as a run of P-DATA-TF fragments."""
    # PDV overhead inside the PDU payload: 4-byte length + context + control.
    chunk_size = max_pdu - 6
    if chunk_size <= 0:
        raise ValueError(f"max_pdu {max_pdu} leaves no room for PDV data")
    offset = 0
    while True:
        chunk = data[offset : offset + chunk_size]
        offset += len(chunk)
        last = offset >= len(data)
        send_pdu(conn, PDataTf((Pdv(context_id, is_command, last, chunk),)))
        if last:
            break
