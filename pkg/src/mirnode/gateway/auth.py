"""Principals, password hashing, sessions, and the role/action matrix.

Passwords are hashed with scrypt (memory-hard; N=2**14, r=8, p=1) under a
per-user random salt and are never stored or logged in clear text. Login
failure is a single error for both unknown-user and wrong-password, and the
unknown-user path burns one scrypt verification against a dummy hash so the
two causes are not distinguishable by timing.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import re
import secrets
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass

from ..archive.db import Database
from .audit import AuditLog
from .errors import (
    AccountDisabled,
    AuthExpired,
    InvalidCredentials,
    InvalidToken,
    PermissionDenied,
    UnknownUser,
    UserExists,
)

ROLES = ("admin", "researcher", "viewer")
ACTIONS = ("view", "query", "tag", "ingest", "run_workflow",
           "manage_extensions", "manage_federation", "manage_users")

_VIEWER_ACTIONS = frozenset({"view", "query"})
_RESEARCHER_ACTIONS = _VIEWER_ACTIONS | {"tag", "ingest", "run_workflow"}
ROLE_ACTIONS: dict[str, frozenset[str]] = {
    "viewer": _VIEWER_ACTIONS,
    "researcher": _RESEARCHER_ACTIONS,
    "admin": frozenset(ACTIONS),
}

SESSION_TTL = 12 * 3600.0

_USERNAME_RE = re.compile(r"^[A-Za-z0-9._-]{1,64}$")
_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2 ** 14, 8, 1


def role_grants(roles, action: str) -> bool:
    return any(action in ROLE_ACTIONS.get(role, frozenset()) for role in roles)


def hash_password(password: str) -> str:
    salt = secrets.token_bytes(16)
    digest = hashlib.scrypt(password.encode("utf-8"), salt=salt,
                            n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P, dklen=32)
    return "$".join(["scrypt", str(_SCRYPT_N), str(_SCRYPT_R), str(_SCRYPT_P),
                     salt.hex(), digest.hex()])


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, digest_hex = stored.split("$")
        if scheme != "scrypt":
            return False
        computed = hashlib.scrypt(
            password.encode("utf-8"), salt=bytes.fromhex(salt_hex),
            n=int(n), r=int(r), p=int(p), dklen=len(digest_hex) // 2)
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(computed.hex(), digest_hex)


_dummy_hash: str | None = None
_dummy_lock = threading.Lock()


def _burn_verification(password: str) -> None:
    """One scrypt evaluation, same cost as a real check, result discarded."""
    global _dummy_hash
    with _dummy_lock:
        if _dummy_hash is None:
            _dummy_hash = hash_password("*")
    verify_password(password, _dummy_hash)


@dataclass(frozen=True)
class Principal:
    id: str
    username: str
    password_hash: str
    roles: frozenset[str]
    disabled: bool
    created_at: str

    def to_public_json(self) -> dict:
        """Everything except the password hash; the only serializable view."""
        return {"id": self.id, "username": self.username,
                "roles": sorted(self.roles), "disabled": self.disabled,
                "created_at": self.created_at}


_SCHEMA = """
CREATE TABLE IF NOT EXISTS principals (
    id          TEXT PRIMARY KEY,
    username    TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    roles       TEXT NOT NULL,
    disabled    INTEGER NOT NULL DEFAULT 0,
    created_at  TEXT NOT NULL
);
"""


class UserStore:
    """Local principal store backed by the node database."""

    def __init__(self, db: Database):
        self.db = db
        db.ensure_schema(_SCHEMA)

    def add_user(self, username: str, password: str, roles) -> Principal:
        if not _USERNAME_RE.match(username or ""):
            raise ValueError(f"invalid username {username!r}")
        roles = frozenset(roles)
        if not roles:
            raise ValueError("at least one role required")
        for role in roles:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if not password:
            raise ValueError("password must be non-empty")
        principal = Principal(
            id=uuid.uuid4().hex, username=username,
            password_hash=hash_password(password), roles=roles,
            disabled=False, created_at=_utc_now())
        try:
            with self.db.tx() as conn:
                conn.execute(
                    "INSERT INTO principals (id, username, password_hash,"
                    " roles, disabled, created_at) VALUES (?, ?, ?, ?, 0, ?)",
                    (principal.id, username, principal.password_hash,
                     json.dumps(sorted(roles)), principal.created_at))
        except sqlite3.IntegrityError:
            raise UserExists(username) from None
        return principal

    def get_by_username(self, username: str) -> Principal | None:
        row = self.db.query_one(
            "SELECT * FROM principals WHERE username = ?", (username,))
        return None if row is None else _principal(row)

    def get_by_id(self, principal_id: str) -> Principal:
        row = self.db.query_one(
            "SELECT * FROM principals WHERE id = ?", (principal_id,))
        if row is None:
            raise UnknownUser(principal_id)
        return _principal(row)

    def set_disabled(self, username: str, disabled: bool) -> Principal:
        with self.db.tx() as conn:
            cur = conn.execute(
                "UPDATE principals SET disabled = ? WHERE username = ?",
                (1 if disabled else 0, username))
            if cur.rowcount == 0:
                raise UnknownUser(username)
        found = self.get_by_username(username)
        assert found is not None
        return found

    def list_users(self) -> list[Principal]:
        rows = self.db.query("SELECT * FROM principals ORDER BY username")
        return [_principal(r) for r in rows]

    def count(self) -> int:
        row = self.db.query_one("SELECT COUNT(*) AS n FROM principals")
        return int(row["n"])


def _principal(row) -> Principal:
    return Principal(
        id=row["id"], username=row["username"],
        password_hash=row["password_hash"],
        roles=frozenset(json.loads(row["roles"])),
        disabled=bool(row["disabled"]), created_at=row["created_at"])


def _utc_now() -> str:
    from datetime import datetime, timezone
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Session:
    token: str
    principal_id: str
    issued_at: float
    expires_at: float


class SessionStore:
    """In-memory session table; tokens are 32 random bytes, compared in
    constant time, and revocable."""

    def __init__(self, clock=time.time, ttl: float = SESSION_TTL):
        self._clock = clock
        self._ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def issue(self, principal_id: str) -> Session:
        now = float(self._clock())
        session = Session(token=secrets.token_bytes(32).hex(),
                          principal_id=principal_id,
                          issued_at=now, expires_at=now + self._ttl)
        with self._lock:
            self._sessions[session.token] = session
        return session

    def lookup(self, token: str) -> Session:
        if not isinstance(token, str) or not token:
            raise InvalidToken("missing bearer token")
        with self._lock:
            found = None
            for stored, session in self._sessions.items():
                if hmac.compare_digest(stored, token):
                    found = session
            if found is None:
                raise InvalidToken("unrecognized token")
            if float(self._clock()) > found.expires_at:
                del self._sessions[found.token]
                raise AuthExpired("session expired")
            return found

    def revoke(self, token: str) -> bool:
        with self._lock:
            return self._sessions.pop(token, None) is not None

    def revoke_principal(self, principal_id: str) -> int:
        with self._lock:
            doomed = [t for t, s in self._sessions.items()
                      if s.principal_id == principal_id]
            for token in doomed:
                del self._sessions[token]
            return len(doomed)


class AuthService:
    """Login, token authentication, and matrix authorization.

    Every denial — invalid token, expired session, or insufficient role —
    appends exactly one audit event; successful reads append none.
    """

    def __init__(self, users: UserStore, sessions: SessionStore,
                 audit: AuditLog):
        self.users = users
        self.sessions = sessions
        self.audit = audit

    def login(self, username: str, password: str) -> tuple[Session, Principal]:
        principal = self.users.get_by_username(username)
        if principal is None:
            _burn_verification(password)
            self.audit.append("system", "login", f"user:{username}", "denied")
            raise InvalidCredentials("invalid credentials")
        if not verify_password(password, principal.password_hash):
            self.audit.append("system", "login", f"user:{username}", "denied")
            raise InvalidCredentials("invalid credentials")
        if principal.disabled:
            self.audit.append(principal.id, "login", f"user:{username}",
                              "denied")
            raise AccountDisabled(username)
        session = self.sessions.issue(principal.id)
        self.audit.append(principal.id, "login", f"user:{username}", "allowed")
        return session, principal

    def authenticate(self, token: str, resource: str = "") -> Principal:
        try:
            session = self.sessions.lookup(token)
        except (InvalidToken, AuthExpired) as exc:
            self.audit.append("system", "authenticate",
                              resource or "token", "denied")
            raise exc
        return self.users.get_by_id(session.principal_id)

    def authorize(self, token: str, action: str,
                  resource: str = "") -> Principal:
        principal = self.authenticate(token, resource=resource or action)
        if not role_grants(principal.roles, action):
            self.audit.append(principal.id, action, resource or action,
                              "denied")
            raise PermissionDenied(
                f"roles {sorted(principal.roles)} do not grant {action}")
        return principal

    def require_admin(self, token: str, resource: str = "") -> Principal:
        principal = self.authenticate(token, resource=resource)
        if "admin" not in principal.roles:
            self.audit.append(principal.id, "admin", resource or "admin",
                              "denied")
            raise PermissionDenied("admin role required")
        return principal
