"""Federation error taxonomy."""


class FederationError(Exception):
    """Base for all federation failures."""


class BadSignature(FederationError):
    pass


class ClockSkew(FederationError):
    pass


class ReplayDetected(FederationError):
    pass


class InviteExpired(FederationError):
    pass


class InviteAlreadyUsed(FederationError):
    pass


class EndpointUnreachable(FederationError):
    pass


class EmptyRound(FederationError):
    pass


class ZeroTotalSamples(FederationError):
    pass


class DimensionMismatch(FederationError):
    pass


class QuorumNotMet(FederationError):
    pass


class ParticipantRejected(FederationError):
    pass


class GuardViolation(FederationError):
    """A message failed the sovereignty guard; fatal for the running job."""


class UnknownLink(FederationError):
    pass


class UnknownJob(FederationError):
    pass
