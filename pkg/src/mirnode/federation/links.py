"""Instance links and single-use invites.

Invite tokens are the MAC key for the handshake request, so the token must
be recoverable until redeemed: it is stored alongside its hash and wiped at
consumption or expiry. The link secret itself never travels in clear: the
handshake ack carries it XOR-wrapped under a digest of the single-use token.
"""
from __future__ import annotations

import hashlib
import secrets
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..archive import Database
from .errors import InviteAlreadyUsed, InviteExpired, UnknownLink

INVITE_LIFETIME = 15 * 60  # seconds

_SCHEMA = """
CREATE TABLE IF NOT EXISTS fed_invites (
    invite_id TEXT PRIMARY KEY,
    token TEXT,
    issued_at REAL NOT NULL,
    used INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS fed_links (
    link_id TEXT PRIMARY KEY,
    local_instance_id TEXT NOT NULL,
    remote_instance_id TEXT NOT NULL,
    remote_endpoint TEXT NOT NULL,
    secret_hex TEXT NOT NULL,
    capabilities TEXT NOT NULL,
    established_at TEXT NOT NULL
);
"""


@dataclass(frozen=True)
class InstanceLink:
    link_id: str
    local_instance_id: str
    remote_instance_id: str
    remote_endpoint: str
    shared_secret: bytes = field(repr=False)
    capabilities: frozenset = frozenset()
    established_at: str = ""

    def to_public_json(self) -> dict:
        """Everything except the secret; the only serializable view."""
        return {
            "link_id": self.link_id,
            "local_instance_id": self.local_instance_id,
            "remote_instance_id": self.remote_instance_id,
            "remote_endpoint": self.remote_endpoint,
            "capabilities": sorted(self.capabilities),
            "established_at": self.established_at,
        }


def invite_id_of(token: str) -> str:
    return hashlib.sha256(token.encode("ascii")).hexdigest()


def wrap_secret(secret: bytes, token: str) -> bytes:
    pad = hashlib.sha256(bytes.fromhex(token) + b"\x01").digest()
    return bytes(a ^ b for a, b in zip(secret, pad))


unwrap_secret = wrap_secret  # XOR wrap is its own inverse


class LinkStore:
    def __init__(self, db: Database):
        self.db = db
        db.ensure_schema(_SCHEMA)

    # -- invites --------------------------------------------------------------

    def issue_invite(self, now: float) -> str:
        token = secrets.token_hex(16)
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO fed_invites (invite_id, token, issued_at, used)"
                " VALUES (?, ?, ?, 0)", (invite_id_of(token), token, now))
        return token

    def peek_invite_key(self, invite_id: str, now: float) -> bytes:
        """MAC key for an open invite; raises if unknown/used/expired."""
        row = self.db.query_one(
            "SELECT token, issued_at, used FROM fed_invites WHERE invite_id = ?",
            (invite_id,))
        if row is None:
            # unknown and long-expired invites are indistinguishable
            raise InviteExpired("no such invite")
        if row["used"]:
            raise InviteAlreadyUsed(invite_id[:12])
        if now - row["issued_at"] > INVITE_LIFETIME:
            raise InviteExpired(invite_id[:12])
        return bytes.fromhex(row["token"])

    def consume_invite(self, invite_id: str, now: float) -> str:
        """Atomically redeem; returns the token for secret wrapping."""
        with self.db.tx() as conn:
            row = conn.execute(
                "SELECT token, issued_at, used FROM fed_invites"
                " WHERE invite_id = ?", (invite_id,)).fetchone()
            if row is None:
                raise InviteExpired("no such invite")
            if row["used"]:
                raise InviteAlreadyUsed(invite_id[:12])
            if now - row["issued_at"] > INVITE_LIFETIME:
                raise InviteExpired(invite_id[:12])
            conn.execute(
                "UPDATE fed_invites SET used = 1, token = NULL"
                " WHERE invite_id = ? AND used = 0", (invite_id,))
            return row["token"]

    # -- links ----------------------------------------------------------------

    def add_link(self, link: InstanceLink) -> None:
        with self.db.tx() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO fed_links (link_id, local_instance_id,"
                " remote_instance_id, remote_endpoint, secret_hex,"
                " capabilities, established_at) VALUES (?, ?, ?, ?, ?, ?, ?)",
                (link.link_id, link.local_instance_id, link.remote_instance_id,
                 link.remote_endpoint, link.shared_secret.hex(),
                 ",".join(sorted(link.capabilities)), link.established_at))

    def get(self, link_id: str) -> InstanceLink:
        row = self.db.query_one(
            "SELECT * FROM fed_links WHERE link_id = ?", (link_id,))
        if row is None:
            raise UnknownLink(link_id)
        return self._link(row)

    def by_remote_instance(self, remote_instance_id: str) -> InstanceLink:
        row = self.db.query_one(
            "SELECT * FROM fed_links WHERE remote_instance_id = ?",
            (remote_instance_id,))
        if row is None:
            raise UnknownLink(remote_instance_id)
        return self._link(row)

    def list_links(self) -> list[InstanceLink]:
        rows = self.db.query("SELECT * FROM fed_links ORDER BY established_at")
        return [self._link(r) for r in rows]

    @staticmethod
    def _link(row) -> InstanceLink:
        caps = frozenset(c for c in row["capabilities"].split(",") if c)
        return InstanceLink(
            link_id=row["link_id"],
            local_instance_id=row["local_instance_id"],
            remote_instance_id=row["remote_instance_id"],
            remote_endpoint=row["remote_endpoint"],
            shared_secret=bytes.fromhex(row["secret_hex"]),
            capabilities=caps,
            established_at=row["established_at"],
        )


def new_link_id() -> str:
    return uuid.uuid4().hex


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()
