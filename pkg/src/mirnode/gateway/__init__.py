"""HTTP gateway: authentication, RBAC, audit chain, and the JSON API."""
from .api import Gateway
from .audit import GENESIS_HASH, AuditEvent, AuditLog, event_hash
from .auth import (
    ACTIONS,
    AuthService,
    Principal,
    ROLE_ACTIONS,
    ROLES,
    SESSION_TTL,
    Session,
    SessionStore,
    UserStore,
    hash_password,
    role_grants,
    verify_password,
)
from .errors import (
    AccountDisabled,
    AuthExpired,
    GatewayError,
    InvalidCredentials,
    InvalidToken,
    PermissionDenied,
    StorageFull,
    UnknownUser,
    UserExists,
)
from .http import (
    Request,
    Response,
    Router,
    error_response,
    json_response,
    start_http_server,
    stop_http_server,
)
from .multipart import Part, encode_multipart, parse_multipart

__all__ = [
    "ACTIONS",
    "AccountDisabled",
    "AuditEvent",
    "AuditLog",
    "AuthExpired",
    "AuthService",
    "GENESIS_HASH",
    "Gateway",
    "GatewayError",
    "InvalidCredentials",
    "InvalidToken",
    "Part",
    "PermissionDenied",
    "Principal",
    "ROLES",
    "ROLE_ACTIONS",
    "Request",
    "Response",
    "Router",
    "SESSION_TTL",
    "Session",
    "SessionStore",
    "StorageFull",
    "UnknownUser",
    "UserExists",
    "UserStore",
    "encode_multipart",
    "error_response",
    "event_hash",
    "hash_password",
    "json_response",
    "parse_multipart",
    "role_grants",
    "start_http_server",
    "stop_http_server",
    "verify_password",
]
