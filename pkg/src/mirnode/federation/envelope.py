"""Signed envelopes for cross-instance calls.

signature = HMAC-SHA256(shared_secret,
    method \n path \n SHA-256(body) hex \n timestamp \n nonce hex)

Verification accepts iff the MAC matches (constant time), |now - ts| <= 300 s,
and the nonce is unseen within the 10-minute replay window. The nonce is
recorded only after full acceptance so unauthenticated traffic cannot poison
the replay cache.
"""
from __future__ import annotations

import hashlib
import hmac
import re
import secrets
import threading
from dataclasses import dataclass, field

from .errors import BadSignature, ClockSkew, ReplayDetected

MAX_CLOCK_SKEW = 300          # seconds
REPLAY_WINDOW = 600           # seconds
SIGNATURE_HEADER = "X-Fed-Signature"

_HEADER_RE = re.compile(
    r"^ts=(\d+),nonce=([0-9a-f]{32}),mac=([0-9a-f]{64})$")


@dataclass(frozen=True)
class SignedEnvelope:
    method: str
    path: str
    timestamp: int
    nonce: bytes
    body: bytes
    signature: bytes = field(repr=False)

    def header_value(self) -> str:
        return (f"ts={self.timestamp},nonce={self.nonce.hex()},"
                f"mac={self.signature.hex()}")


def canonical_string(method: str, path: str, body: bytes, timestamp: int,
                     nonce: bytes) -> bytes:
    return "\n".join([
        method,
        path,
        hashlib.sha256(body).hexdigest(),
        str(int(timestamp)),
        nonce.hex(),
    ]).encode("ascii")


def compute_mac(secret: bytes, method: str, path: str, body: bytes,
                timestamp: int, nonce: bytes) -> bytes:
    return hmac.new(secret, canonical_string(method, path, body, timestamp, nonce),
                    hashlib.sha256).digest()


def sign_envelope(secret: bytes, method: str, path: str, body: bytes,
                  now: float, nonce: bytes | None = None) -> SignedEnvelope:
    nonce = secrets.token_bytes(16) if nonce is None else nonce
    if len(nonce) != 16:
        raise ValueError("nonce must be 16 bytes")
    ts = int(now)
    return SignedEnvelope(method=method, path=path, timestamp=ts, nonce=nonce,
                          body=body,
                          signature=compute_mac(secret, method, path, body, ts, nonce))


def envelope_from_header(method: str, path: str, body: bytes,
                         header: str) -> SignedEnvelope:
    m = _HEADER_RE.match(header or "")
    if m is None:
        raise BadSignature(f"malformed {SIGNATURE_HEADER} header")
    ts, nonce_hex, mac_hex = m.groups()
    return SignedEnvelope(method=method, path=path, timestamp=int(ts),
                          nonce=bytes.fromhex(nonce_hex), body=body,
                          signature=bytes.fromhex(mac_hex))


class NonceCache:
    """Replay protection; safe under concurrent verification."""

    def __init__(self, window: int = REPLAY_WINDOW):
        self.window = window
        self._seen: dict[bytes, float] = {}
        self._lock = threading.Lock()

    def check_and_record(self, nonce: bytes, now: float) -> bool:
        """True if fresh (and records it); False if seen within the window."""
        with self._lock:
            cutoff = now - self.window
            if len(self._seen) > 4096:
                for key in [k for k, t in self._seen.items() if t < cutoff]:
                    del self._seen[key]
            seen_at = self._seen.get(nonce)
            if seen_at is not None and seen_at >= cutoff:
                return False
            self._seen[nonce] = now
            return True


def verify_envelope(secret: bytes, env: SignedEnvelope, cache: NonceCache,
                    now: float) -> bytes:
    """Returns the accepted body; raises BadSignature/ClockSkew/ReplayDetected."""
    expected = compute_mac(secret, env.method, env.path, env.body,
                           env.timestamp, env.nonce)
    if not hmac.compare_digest(expected, env.signature):
        raise BadSignature("MAC mismatch")
    if abs(now - env.timestamp) > MAX_CLOCK_SKEW:
        raise ClockSkew(f"timestamp {env.timestamp} vs now {int(now)}")
    if not cache.check_and_record(env.nonce, now):
        raise ReplayDetected(env.nonce.hex())
    return env.body
