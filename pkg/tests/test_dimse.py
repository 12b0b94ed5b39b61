"""DIMSE layer: PDU codec, negotiation policy, SCP/SCU loopback."""
from __future__ import annotations

import hashlib
import random
import socket
import struct
import time

import pytest

from mirnode.dicom import (
    EXPLICIT_VR_LE,
    IMPLICIT_VR_LE,
    IMPLEMENTATION_CLASS_UID,
    VERIFICATION_SOP_CLASS,
    parse_part10,
    serialize_part10,
)
from mirnode.dimse import (
    Abort,
    AcceptedContext,
    AssociateAc,
    AssociateRj,
    AssociateRq,
    AssociationConfig,
    AssociationRejected,
    CONTEXT_ABSTRACT_UNSUPPORTED,
    CONTEXT_ACCEPTED,
    CONTEXT_TRANSFER_UNSUPPORTED,
    DimseServer,
    LengthMismatch,
    NoAcceptedContext,
    PDataTf,
    Pdv,
    ProposedContext,
    ReleaseRp,
    ReleaseRq,
    STATUS_OUT_OF_RESOURCES,
    STATUS_SUCCESS,
    ScuAssociation,
    UnknownPduType,
    accept_association,
    decode_pdu,
    encode_pdu,
    scu_echo,
    scu_send,
)

from gen_dicom import random_instance


# -- codec ----------------------------------------------------------------


def test_release_rq_frozen_bytes():
    assert encode_pdu(ReleaseRq()) == bytes.fromhex("05000000000400000000")


def test_abort_frozen_bytes():
    assert encode_pdu(Abort(source=0, reason=0)) == bytes.fromhex("07000000000400000000")


def test_unknown_pdu_type():
    with pytest.raises(UnknownPduType):
        decode_pdu(bytes([0x09, 0, 0, 0, 0, 0]))


def test_length_mismatch():
    data = bytes([0x05, 0]) + struct.pack(">I", 10) + bytes(4)
    with pytest.raises(LengthMismatch):
        decode_pdu(data)


def test_decode_frozen_associate_rq_capture():
    # Composed by hand from the documented wire layout, independent of the
    # encoder under test.
    def item(t: int, payload: bytes) -> bytes:
        return bytes([t, 0]) + struct.pack(">H", len(payload)) + payload

    app = item(0x10, b"1.2.840.10008.3.1.1.1")
    ctx_body = (bytes([1, 0, 0, 0])
                + item(0x30, b"1.2.840.10008.1.1")
                + item(0x40, b"1.2.840.10008.1.2.1"))
    user = item(0x50, item(0x51, struct.pack(">I", 16384)) + item(0x52, b"1.2.3.4"))
    payload = (struct.pack(">HH", 1, 0)
               + b"MINIPACS".ljust(16) + b"TESTSCU".ljust(16) + bytes(32)
               + app + item(0x20, ctx_body) + user)
    capture = bytes([0x01, 0]) + struct.pack(">I", len(payload)) + payload

    rq = decode_pdu(capture)
    assert isinstance(rq, AssociateRq)
    assert rq.called_ae == "MINIPACS"
    assert rq.calling_ae == "TESTSCU"
    assert rq.protocol_version == 1
    assert rq.max_pdu_length == 16384
    assert rq.implementation_class_uid == "1.2.3.4"
    assert rq.contexts == (
        ProposedContext(1, "1.2.840.10008.1.1", ("1.2.840.10008.1.2.1",)),)
    assert encode_pdu(rq) == capture


def _random_uid(rng: random.Random) -> str:
    return ".".join(str(rng.randrange(1, 100)) for _ in range(rng.randrange(2, 6)))


def _random_ae(rng: random.Random) -> str:
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    return "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 17)))


def _random_pdu(rng: random.Random):
    kind = rng.randrange(7)
    if kind == 0:
        ids = rng.sample(range(1, 256, 2), rng.randrange(1, 6))
        contexts = tuple(
            ProposedContext(i, _random_uid(rng),
                            tuple(_random_uid(rng) for _ in range(rng.randrange(1, 4))))
            for i in ids)
        return AssociateRq(_random_ae(rng), _random_ae(rng), contexts,
                           rng.randrange(4096, 1 << 20), _random_uid(rng))
    if kind == 1:
        ids = rng.sample(range(1, 256, 2), rng.randrange(1, 6))
        contexts = []
        for i in ids:
            result = rng.choice([0, 1, 3, 4])
            ts = _random_uid(rng) if result == 0 else ""
            contexts.append(AcceptedContext(i, result, ts))
        return AssociateAc(_random_ae(rng), _random_ae(rng), tuple(contexts),
                           rng.randrange(4096, 1 << 20), _random_uid(rng))
    if kind == 2:
        return AssociateRj(rng.randrange(1, 3), rng.randrange(1, 4), rng.randrange(0, 11))
    if kind == 3:
        pdvs = tuple(
            Pdv(rng.randrange(1, 256, 2), rng.random() < 0.5, rng.random() < 0.5,
                rng.randbytes(rng.randrange(0, 200)))
            for _ in range(rng.randrange(1, 5)))
        return PDataTf(pdvs)
    if kind == 4:
        return ReleaseRq()
    if kind == 5:
        return ReleaseRp()
    return Abort(rng.randrange(0, 3), rng.randrange(0, 6))


def test_codec_inverse_property():
    rng = random.Random(424242)
    for _ in range(1000):
        pdu = _random_pdu(rng)
        assert decode_pdu(encode_pdu(pdu)) == pdu


# -- negotiation policy ----------------------------------------------------


def _rq(called="MINIPACS", contexts=None, max_pdu=16384) -> AssociateRq:
    if contexts is None:
        contexts = (ProposedContext(1, VERIFICATION_SOP_CLASS, (EXPLICIT_VR_LE,)),)
    return AssociateRq(called, "ANYSCU", contexts, max_pdu, "1.2.3.4")


def test_accept_verification_context():
    ac = accept_association(_rq(), AssociationConfig())
    assert isinstance(ac, AssociateAc)
    assert ac.contexts == (AcceptedContext(1, CONTEXT_ACCEPTED, EXPLICIT_VR_LE),)


def test_reject_wrong_called_ae():
    rj = accept_association(_rq(called="SOMEONE"), AssociationConfig())
    assert rj == AssociateRj(result=1, source=1, reason=7)


def test_unknown_abstract_syntax_gets_result_3():
    rq = _rq(contexts=(ProposedContext(1, "1.2.3", (EXPLICIT_VR_LE,)),))
    ac = accept_association(rq, AssociationConfig())
    assert ac.contexts[0].result == CONTEXT_ABSTRACT_UNSUPPORTED


def test_unsupported_transfer_syntax_gets_result_4():
    rq = _rq(contexts=(
        ProposedContext(1, VERIFICATION_SOP_CLASS, ("1.2.840.10008.1.2.2",)),))
    ac = accept_association(rq, AssociationConfig())
    assert ac.contexts[0].result == CONTEXT_TRANSFER_UNSUPPORTED


def test_first_proposed_supported_syntax_wins():
    rq = _rq(contexts=(
        ProposedContext(1, VERIFICATION_SOP_CLASS,
                        ("1.2.840.10008.1.2.2", IMPLICIT_VR_LE, EXPLICIT_VR_LE)),))
    ac = accept_association(rq, AssociationConfig())
    assert ac.contexts[0] == AcceptedContext(1, CONTEXT_ACCEPTED, IMPLICIT_VR_LE)


def test_negotiated_max_pdu_is_min():
    ac = accept_association(_rq(max_pdu=16384),
                            AssociationConfig(max_pdu_length=8192))
    assert ac.max_pdu_length == 8192
    ac = accept_association(_rq(max_pdu=4096),
                            AssociationConfig(max_pdu_length=8192))
    assert ac.max_pdu_length == 4096
    assert ac.implementation_class_uid == IMPLEMENTATION_CLASS_UID


def test_config_enforces_pdu_floor():
    with pytest.raises(ValueError):
        AssociationConfig(max_pdu_length=1024)


# -- loopback -------------------------------------------------------------


@pytest.fixture()
def server():
    stored: dict[str, bytes] = {}
    srv = DimseServer("127.0.0.1", 0, AssociationConfig(),
                      lambda uid, data: stored.__setitem__(uid, data))
    srv.stored = stored
    srv.start()
    yield srv
    srv.stop()


def _wait_summaries(srv: DimseServer, n: int, deadline: float = 5.0):
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        if len(srv.summaries) >= n:
            return srv.summaries
        time.sleep(0.01)
    raise AssertionError(f"expected {n} summaries, have {len(srv.summaries)}")


def test_echo_loopback(server):
    statuses = scu_echo("127.0.0.1", server.port, AssociationConfig(), count=5)
    assert statuses == [STATUS_SUCCESS] * 5
    summary = _wait_summaries(server, 1)[0]
    assert summary.outcome == "released"
    assert summary.echoes == 5
    assert summary.violation is None


def test_store_two_mib_hash_equal(server):
    rng = random.Random(77)
    meta, ds = random_instance(rng, rows=1024, cols=1024, bits=16)  # 2 MiB pixels
    blob = serialize_part10(meta, ds)
    assert len(blob) > 2 * 1024 * 1024
    statuses = scu_send("127.0.0.1", server.port,
                        AssociationConfig(max_pdu_length=8192), [blob])
    assert statuses == [STATUS_SUCCESS]
    uid = meta.media_sop_instance_uid
    assert hashlib.sha256(server.stored[uid]).hexdigest() == \
        hashlib.sha256(blob).hexdigest()


def test_fragmentation_invariance(server):
    rng = random.Random(78)
    meta, ds = random_instance(rng, rows=256, cols=256)
    blob = serialize_part10(meta, ds)
    uid = meta.media_sop_instance_uid
    received = []
    for max_pdu in (4096, 8192, 16384):
        server.stored.clear()
        statuses = scu_send("127.0.0.1", server.port,
                            AssociationConfig(max_pdu_length=max_pdu), [blob])
        assert statuses == [STATUS_SUCCESS]
        received.append(server.stored[uid])
    assert received[0] == received[1] == received[2] == blob


def test_store_mixed_syntaxes(server):
    rng = random.Random(79)
    files = []
    for ts in (EXPLICIT_VR_LE, IMPLICIT_VR_LE, EXPLICIT_VR_LE):
        meta, ds = random_instance(rng, transfer_syntax=ts)
        files.append(serialize_part10(meta, ds))
    statuses = scu_send("127.0.0.1", server.port, AssociationConfig(), files)
    assert statuses == [STATUS_SUCCESS] * 3
    for blob in files:
        meta, _ = parse_part10(blob)
        assert server.stored[meta.media_sop_instance_uid] == blob


def test_empty_file_list_releases_cleanly(server):
    assert scu_send("127.0.0.1", server.port, AssociationConfig(), []) == []
    summary = _wait_summaries(server, 1)[0]
    assert summary.outcome == "released"
    assert summary.stores == 0


def test_wrong_called_ae_rejected(server):
    cfg = AssociationConfig(called_ae="NOSUCHAE")
    with pytest.raises(AssociationRejected) as exc_info:
        scu_echo("127.0.0.1", server.port, cfg)
    assert exc_info.value.reason == 7
    assert "called AE title not recognized" in str(exc_info.value)
    summary = _wait_summaries(server, 1)[0]
    assert summary.outcome == "rejected"


def test_echo_interleaved_with_stores(server):
    rng = random.Random(80)
    meta, ds = random_instance(rng)
    blob = serialize_part10(meta, ds)
    proposals = [(VERIFICATION_SOP_CLASS, (EXPLICIT_VR_LE,)),
                 (meta.media_sop_class_uid, (EXPLICIT_VR_LE,))]
    assoc = ScuAssociation.connect("127.0.0.1", server.port,
                                   AssociationConfig(), proposals)
    assert assoc.echo() == STATUS_SUCCESS
    assert assoc.store(blob) == STATUS_SUCCESS
    assert assoc.echo() == STATUS_SUCCESS
    assoc.release()
    summary = _wait_summaries(server, 1)[0]
    assert (summary.echoes, summary.stores, summary.outcome) == (2, 1, "released")


def test_no_accepted_context_for_unknown_abstract(server):
    assoc = ScuAssociation.connect("127.0.0.1", server.port, AssociationConfig(),
                                   [("1.2.3", (EXPLICIT_VR_LE,))])
    with pytest.raises(NoAcceptedContext):
        assoc.echo()
    assoc.release()


def test_pdata_before_association_is_violation(server):
    with socket.create_connection(("127.0.0.1", server.port), timeout=5) as conn:
        conn.sendall(encode_pdu(PDataTf((Pdv(1, True, True, b"xx"),))))
        answer = conn.recv(16)
    assert answer[:2] == bytes([0x07, 0])  # A-ABORT
    summary = _wait_summaries(server, 1)[0]
    assert summary.outcome == "aborted"
    assert "ProtocolViolation" in (summary.violation or "")


def test_sink_failure_returns_out_of_resources():
    def failing_sink(uid: str, data: bytes) -> None:
        raise RuntimeError("disk full")

    srv = DimseServer("127.0.0.1", 0, AssociationConfig(), failing_sink)
    srv.start()
    try:
        rng = random.Random(81)
        meta, ds = random_instance(rng)
        statuses = scu_send("127.0.0.1", srv.port, AssociationConfig(),
                            [serialize_part10(meta, ds)])
        assert statuses == [STATUS_OUT_OF_RESOURCES]
        summary = _wait_summaries(srv, 1)[0]
        assert summary.store_failures == 1
        assert summary.outcome == "released"
    finally:
        srv.stop()


def test_idle_timeout_aborts():
    srv = DimseServer("127.0.0.1", 0,
                      AssociationConfig(assoc_timeout=10.0, idle_timeout=0.2),
                      lambda uid, data: None)
    srv.start()
    try:
        assoc = ScuAssociation.connect(
            "127.0.0.1", srv.port, AssociationConfig(),
            [(VERIFICATION_SOP_CLASS, (EXPLICIT_VR_LE,))])
        # stay silent past the idle window; the SCP must abort
        time.sleep(0.5)
        answer = assoc._conn.recv(16)
        assert answer[:2] == bytes([0x07, 0])
        assoc.close()
        summary = _wait_summaries(srv, 1)[0]
        assert "IdleTimeout" in (summary.violation or "")
    finally:
        srv.stop()
