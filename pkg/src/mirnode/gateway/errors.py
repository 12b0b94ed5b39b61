class GatewayError(Exception):
    """Base class for authentication, authorization, and audit errors."""


class InvalidCredentials(GatewayError):
    """Login failed: deliberately identical for unknown-user and wrong-password."""


class AccountDisabled(GatewayError):
    """Credentials were correct but the account is disabled."""


class InvalidToken(GatewayError):
    """No session matches the presented token."""


class AuthExpired(GatewayError):
    """The session existed but its 12-hour lifetime has passed."""


class PermissionDenied(GatewayError):
    """No role held by the principal grants the requested action."""


class UserExists(GatewayError):
    """A principal with that username already exists."""


class UnknownUser(GatewayError):
    """No principal with that username or id."""


class StorageFull(GatewayError):
    """The audit log could not be appended because storage is exhausted."""
