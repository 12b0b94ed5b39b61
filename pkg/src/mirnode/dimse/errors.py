"""DIMSE wire-protocol error taxonomy."""


class DimseError(Exception):
    """Base class for DIMSE protocol failures."""


class OversizePayload(DimseError):
    """PDU payload exceeds the 32-bit length field."""


class UnknownPduType(DimseError):
    """PDU type byte outside 0x01-0x07."""


class LengthMismatch(DimseError):
    """Declared PDU length disagrees with the bytes supplied."""


class MalformedPayload(DimseError):
    """PDU payload violates its variant's layout."""


class ProtocolViolation(DimseError):
    """Peer behavior outside the association state machine."""


class IdleTimeout(DimseError):
    """No traffic within the idle window on an established association."""


class ConnectFailed(DimseError):
    """TCP connection to the peer could not be opened."""


class AssociationRejected(DimseError):
    """Peer answered A-ASSOCIATE-RQ with a rejection."""

    def __init__(self, result: int, source: int, reason: int):
        self.result = result
        self.source = source
        self.reason = reason
        super().__init__(f"association rejected: {describe_rejection(source, reason)}")


class NoAcceptedContext(DimseError):
    """No presentation context usable for the requested operation."""


class PeerAborted(DimseError):
    """Peer sent A-ABORT or dropped the connection mid-association."""


def describe_rejection(source: int, reason: int) -> str:
    if source == 1 and reason == 7:
        return "called AE title not recognized"
    if source == 1 and reason == 3:
        return "calling AE title not recognized"
    if source == 1 and reason == 2:
        return "application context name not supported"
    return f"source {source}, reason {reason}"
