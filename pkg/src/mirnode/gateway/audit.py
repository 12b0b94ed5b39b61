"""Append-only audit log with a SHA-256 hash chain.

Each event's hash covers (seq, time, principal, action, resource, outcome,
prev_hash) joined by newlines; the first event chains from a genesis value
of 32 zero bytes. Appends are strictly serialized so the chain is total.
"""
from __future__ import annotations

import hashlib
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
import time

from ..archive.db import Database
from .errors import StorageFull

GENESIS_HASH = "0" * 64
OUTCOMES = ("allowed", "denied", "error")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS audit_events (
    seq        INTEGER PRIMARY KEY,
    time       TEXT NOT NULL,
    principal  TEXT NOT NULL,
    action     TEXT NOT NULL,
    resource   TEXT NOT NULL,
    outcome    TEXT NOT NULL,
    prev_hash  TEXT NOT NULL,
    hash       TEXT NOT NULL
);
"""


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    time: str
    principal: str
    action: str
    resource: str
    outcome: str
    prev_hash: str
    hash: str

    def to_json(self) -> dict:
        return {"seq": self.seq, "time": self.time,
                "principal": self.principal, "action": self.action,
                "resource": self.resource, "outcome": self.outcome,
                "prev_hash": self.prev_hash, "hash": self.hash}


def event_hash(seq: int, time_text: str, principal: str, action: str,
               resource: str, outcome: str, prev_hash: str) -> str:
    material = "\n".join([str(seq), time_text, principal, action,
                          resource, outcome, prev_hash])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def _clean(text: str) -> str:
    # fields are newline-joined under the hash, so fields must not contain one
    return str(text).replace("\n", " ").replace("\r", " ")


class AuditLog:
    def __init__(self, db: Database, clock=time.time):
        self.db = db
        self._clock = clock
        self._lock = threading.Lock()
        db.ensure_schema(_SCHEMA)

    def append(self, principal: str, action: str, resource: str,
               outcome: str) -> AuditEvent:
        if outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")
        principal = _clean(principal) or "system"
        action = _clean(action)
        resource = _clean(resource)
        when = datetime.fromtimestamp(
            float(self._clock()), tz=timezone.utc).isoformat()
        try:
            with self._lock, self.db.tx() as conn:
                row = conn.execute(
                    "SELECT seq, hash FROM audit_events"
                    " ORDER BY seq DESC LIMIT 1").fetchone()
                seq = 1 if row is None else int(row["seq"]) + 1
                prev_hash = GENESIS_HASH if row is None else row["hash"]
                digest = event_hash(seq, when, principal, action, resource,
                                    outcome, prev_hash)
                conn.execute(
                    "INSERT INTO audit_events (seq, time, principal, action,"
                    " resource, outcome, prev_hash, hash)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (seq, when, principal, action, resource, outcome,
                     prev_hash, digest))
        except (sqlite3.OperationalError, OSError) as exc:
            if "full" in str(exc).lower():
                raise StorageFull(str(exc)) from exc
            raise
        return AuditEvent(seq, when, principal, action, resource, outcome,
                          prev_hash, digest)

    def events(self, after_seq: int = 0,
               limit: int | None = None) -> list[AuditEvent]:
        sql = "SELECT * FROM audit_events WHERE seq > ? ORDER BY seq"
        args: tuple = (after_seq,)
        if limit is not None:
            sql += " LIMIT ?"
            args = (after_seq, limit)
        return [_event(row) for row in self.db.query(sql, args)]

    def last_seq(self) -> int:
        row = self.db.query_one(
            "SELECT seq FROM audit_events ORDER BY seq DESC LIMIT 1")
        return 0 if row is None else int(row["seq"])

    def verify(self) -> int | None:
        """Walk the chain from genesis; return the first bad seq, else None."""
        expected_seq = 1
        prev_hash = GENESIS_HASH
        for event in self.events():
            if event.seq != expected_seq or event.prev_hash != prev_hash:
                return event.seq
            recomputed = event_hash(event.seq, event.time, event.principal,
                                    event.action, event.resource,
                                    event.outcome, event.prev_hash)
            if recomputed != event.hash:
                return event.seq
            prev_hash = event.hash
            expected_seq += 1
        return None


def _event(row) -> AuditEvent:
    return AuditEvent(
        seq=int(row["seq"]), time=row["time"], principal=row["principal"],
        action=row["action"], resource=row["resource"],
        outcome=row["outcome"], prev_hash=row["prev_hash"], hash=row["hash"])
