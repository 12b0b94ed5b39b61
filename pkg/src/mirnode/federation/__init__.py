"""Federated analysis: signed envelopes, sovereignty guard, parameter averaging."""
from .aggregate import RoundResult, aggregate_round
from .envelope import (
    MAX_CLOCK_SKEW,
    NonceCache,
    REPLAY_WINDOW,
    SIGNATURE_HEADER,
    SignedEnvelope,
    canonical_string,
    compute_mac,
    envelope_from_header,
    sign_envelope,
    verify_envelope,
)
from .errors import (
    BadSignature,
    ClockSkew,
    DimensionMismatch,
    EmptyRound,
    EndpointUnreachable,
    FederationError,
    GuardViolation,
    InviteAlreadyUsed,
    InviteExpired,
    ParticipantRejected,
    QuorumNotMet,
    ReplayDetected,
    UnknownJob,
    UnknownLink,
    ZeroTotalSamples,
)
from .guard import (
    ALLOWED_KINDS,
    DEFAULT_MAX_BODY,
    GuardDecision,
    SovereigntyPolicy,
    guard_message,
)
from .links import (
    INVITE_LIFETIME,
    InstanceLink,
    LinkStore,
    invite_id_of,
    new_link_id,
    unwrap_secret,
    wrap_secret,
)
from .service import HANDSHAKE_PATH, FederatedJob, FederationService

__all__ = [
    "ALLOWED_KINDS",
    "BadSignature",
    "ClockSkew",
    "DEFAULT_MAX_BODY",
    "DimensionMismatch",
    "EmptyRound",
    "EndpointUnreachable",
    "FederatedJob",
    "FederationError",
    "FederationService",
    "GuardDecision",
    "GuardViolation",
    "HANDSHAKE_PATH",
    "INVITE_LIFETIME",
    "InstanceLink",
    "InviteAlreadyUsed",
    "InviteExpired",
    "LinkStore",
    "MAX_CLOCK_SKEW",
    "NonceCache",
    "ParticipantRejected",
    "QuorumNotMet",
    "REPLAY_WINDOW",
    "ReplayDetected",
    "RoundResult",
    "SIGNATURE_HEADER",
    "SignedEnvelope",
    "SovereigntyPolicy",
    "UnknownJob",
    "UnknownLink",
    "ZeroTotalSamples",
    "aggregate_round",
    "canonical_string",
    "compute_mac",
    "envelope_from_header",
    "guard_message",
    "invite_id_of",
    "new_link_id",
    "sign_envelope",
    "unwrap_secret",
    "verify_envelope",
    "wrap_secret",
]
