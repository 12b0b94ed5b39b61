"""Binary-safe multipart/form-data encoding and decoding."""
from __future__ import annotations

import re
import secrets
from dataclasses import dataclass


@dataclass(frozen=True)
class Part:
    name: str
    filename: str | None
    content_type: str
    data: bytes


_BOUNDARY_RE = re.compile(r'boundary=(?:"([^"]+)"|([^;,\s]+))', re.IGNORECASE)
_NAME_RE = re.compile(r'\bname="([^"]*)"')
_FILENAME_RE = re.compile(r'\bfilename="([^"]*)"')


def parse_multipart(content_type: str, body: bytes) -> list[Part]:
    if not content_type or "multipart/" not in content_type.lower():
        raise ValueError("not a multipart body")
    found = _BOUNDARY_RE.search(content_type)
    if not found:
        raise ValueError("multipart content-type without boundary")
    boundary = (found.group(1) or found.group(2)).encode("ascii")
    delimiter = b"--" + boundary

    start = body.find(delimiter)
    if start < 0:
        raise ValueError("opening boundary not found")
    rest = body[start + len(delimiter):]
    parts: list[Part] = []
    while True:
        if rest.startswith(b"--"):
            break  # closing delimiter
        if rest.startswith(b"\r\n"):
            rest = rest[2:]
        head, sep, remainder = rest.partition(b"\r\n\r\n")
        if not sep:
            raise ValueError("part without header terminator")
        next_at = remainder.find(b"\r\n" + delimiter)
        if next_at < 0:
            raise ValueError("part without closing boundary")
        content = remainder[:next_at]
        rest = remainder[next_at + 2 + len(delimiter):]

        headers: dict[str, str] = {}
        for line in head.split(b"\r\n"):
            if not line.strip():
                continue
            key, _, value = line.partition(b":")
            headers[key.decode("latin-1").strip().lower()] = \
                value.decode("latin-1").strip()
        disposition = headers.get("content-disposition", "")
        name_match = _NAME_RE.search(disposition)
        if name_match is None:
            raise ValueError("part without a field name")
        filename_match = _FILENAME_RE.search(disposition)
        parts.append(Part(
            name=name_match.group(1),
            filename=filename_match.group(1) if filename_match else None,
            content_type=headers.get("content-type",
                                     "application/octet-stream"),
            data=content))
    if not parts:
        raise ValueError("multipart body with no parts")
    return parts


def encode_multipart(parts: list[Part]) -> tuple[str, bytes]:
    """Returns (content_type_header_value, body)."""
    payload = b"".join(p.data for p in parts)
    while True:
        boundary = "mirnode-" + secrets.token_hex(16)
        if boundary.encode("ascii") not in payload:
            break
    chunks: list[bytes] = []
    for part in parts:
        disposition = f'form-data; name="{part.name}"'
        if part.filename is not None:
            disposition += f'; filename="{part.filename}"'
        chunks.append(b"--" + boundary.encode("ascii") + b"\r\n"
                      + f"Content-Disposition: {disposition}\r\n".encode()
                      + f"Content-Type: {part.content_type}\r\n".encode()
                      + b"\r\n" + part.data + b"\r\n")
    chunks.append(b"--" + boundary.encode("ascii") + b"--\r\n")
    return f"multipart/form-data; boundary={boundary}", b"".join(chunks)
