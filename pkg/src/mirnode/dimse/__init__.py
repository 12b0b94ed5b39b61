"""DIMSE upper layer: PDU codec, association negotiation, SCP and SCU."""

from .association import (
    AssociationConfig,
    DEFAULT_ABSTRACT_SYNTAXES,
    MAX_PDU_FLOOR,
    accept_association,
)
from .errors import (
    AssociationRejected,
    ConnectFailed,
    DimseError,
    IdleTimeout,
    LengthMismatch,
    MalformedPayload,
    NoAcceptedContext,
    OversizePayload,
    PeerAborted,
    ProtocolViolation,
    UnknownPduType,
)
from .messages import (
    C_ECHO_RQ,
    C_ECHO_RSP,
    C_STORE_RQ,
    C_STORE_RSP,
    DimseCommand,
    STATUS_OUT_OF_RESOURCES,
    STATUS_SUCCESS,
    echo_rq,
    echo_rsp,
    parse_command,
    store_rq,
    store_rsp,
)
from .pdu import (
    Abort,
    AcceptedContext,
    APPLICATION_CONTEXT,
    AssociateAc,
    AssociateRj,
    AssociateRq,
    CONTEXT_ABSTRACT_UNSUPPORTED,
    CONTEXT_ACCEPTED,
    CONTEXT_TRANSFER_UNSUPPORTED,
    CONTEXT_USER_REJECTED,
    DEFAULT_MAX_PDU,
    PDataTf,
    Pdu,
    Pdv,
    ProposedContext,
    ReleaseRp,
    ReleaseRq,
    decode_pdu,
    encode_pdu,
)
from .scp import AssociationSummary, DimseServer, InstanceSink, scp_serve
from .scu import ScuAssociation, scu_echo, scu_send

__all__ = [
    "AssociationConfig",
    "accept_association",
    "DEFAULT_ABSTRACT_SYNTAXES",
    "MAX_PDU_FLOOR",
    "DimseError",
    "OversizePayload",
    "UnknownPduType",
    "LengthMismatch",
    "MalformedPayload",
    "ProtocolViolation",
    "IdleTimeout",
    "ConnectFailed",
    "AssociationRejected",
    "NoAcceptedContext",
    "PeerAborted",
    "DimseCommand",
    "C_ECHO_RQ",
    "C_ECHO_RSP",
    "C_STORE_RQ",
    "C_STORE_RSP",
    "STATUS_SUCCESS",
    "STATUS_OUT_OF_RESOURCES",
    "echo_rq",
    "echo_rsp",
    "store_rq",
    "store_rsp",
    "parse_command",
    "Pdu",
    "Pdv",
    "PDataTf",
    "AssociateRq",
    "AssociateAc",
    "AssociateRj",
    "ReleaseRq",
    "ReleaseRp",
    "Abort",
    "ProposedContext",
    "AcceptedContext",
    "APPLICATION_CONTEXT",
    "DEFAULT_MAX_PDU",
    "CONTEXT_ACCEPTED",
    "CONTEXT_USER_REJECTED",
    "CONTEXT_ABSTRACT_UNSUPPORTED",
    "CONTEXT_TRANSFER_UNSUPPORTED",
    "encode_pdu",
    "decode_pdu",
    "AssociationSummary",
    "DimseServer",
    "InstanceSink",
    "scp_serve",
    "ScuAssociation",
    "scu_echo",
    "scu_send",
]
